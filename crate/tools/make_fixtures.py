#!/usr/bin/env python3
"""Generate the committed test fixtures under crates/forge/tests/fixtures/.

Everything here is built with Python's standard library (zipfile, zlib,
struct) rather than the crate's own builders, so the Rust parsers are
exercised against independently produced bytes. Run from the repo root:

    python3 tools/make_fixtures.py

Output is deterministic; re-running must reproduce identical files.
"""

import io
import json
import random
import shutil
import struct
import zipfile
import zlib
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "forge" / "tests" / "fixtures"

NO_INDEX = 0xFFFFFFFF

# --------------------------------------------------------------------------
# DEX builder


def uleb(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


RETURN_DESC = {
    "V": "V", "I": "I", "Z": "Z", "B": "B", "S": "S", "C": "C",
    "J": "J", "F": "F", "D": "D", "L": "Ljava/lang/Object;",
}


def build_dex(invoked, referenced=(), filler=b""):
    """A single-class DEX whose Main.run()V invokes each method in
    `invoked`; `referenced` methods sit in the id table without call sites.
    Methods are (class_descriptor, name, shorty) triples."""
    container = ("LMain;", "run", "V")
    specs = list(invoked) + list(referenced) + [container]

    strings = set()
    for cls, name, shorty in specs:
        strings |= {cls, name, shorty, RETURN_DESC[shorty[0]]}
    strings = sorted(strings)
    sidx = {s: i for i, s in enumerate(strings)}

    type_descs = sorted({cls for cls, _, _ in specs} | {RETURN_DESC[sh[0]] for _, _, sh in specs})
    tidx = {t: i for i, t in enumerate(type_descs)}

    protos = sorted({(sh, RETURN_DESC[sh[0]]) for _, _, sh in specs})
    pidx = {p: i for i, p in enumerate(protos)}

    methods = sorted(
        {(tidx[cls], pidx[(sh, RETURN_DESC[sh[0]])], sidx[name]) for cls, name, sh in specs}
    )
    midx = {m: i for i, m in enumerate(methods)}

    def method_index(cls, name, sh):
        return midx[(tidx[cls], pidx[(sh, RETURN_DESC[sh[0]])], sidx[name])]

    header_size = 0x70
    string_ids_off = header_size
    type_ids_off = string_ids_off + 4 * len(strings)
    proto_ids_off = type_ids_off + 4 * len(type_descs)
    method_ids_off = proto_ids_off + 12 * len(protos)
    class_defs_off = method_ids_off + 8 * len(methods)
    data_off = class_defs_off + 32

    # Data section: string blobs, aligned code item, class data, filler.
    data = bytearray()
    string_offs = []
    for s in strings:
        string_offs.append(data_off + len(data))
        enc = s.encode("utf-8")  # ASCII-only fixtures: MUTF-8 == UTF-8
        data += uleb(len(s)) + enc + b"\x00"

    while (data_off + len(data)) % 4:
        data += b"\x00"
    code_off = data_off + len(data)
    insns = []
    for cls, name, sh in invoked:
        insns += [0x106E, method_index(cls, name, sh), 0x0000]  # invoke-virtual {v0}
    insns.append(0x000E)  # return-void
    data += struct.pack("<HHHHII", 1, 0, 1, 0, 0, len(insns))
    data += struct.pack("<%dH" % len(insns), *insns)

    class_data_off = data_off + len(data)
    data += uleb(0) + uleb(0) + uleb(1) + uleb(0)
    data += uleb(method_index(*container)) + uleb(0x1) + uleb(code_off)
    data += filler

    file_size = data_off + len(data)
    header = bytearray()
    header += b"dex\n035\x00"
    header += struct.pack("<I", 0)  # checksum, patched below
    header += bytes(20)  # sha-1 signature, unchecked
    header += struct.pack("<II", file_size, header_size)
    header += struct.pack("<I", 0x12345678)  # endian tag
    header += struct.pack("<III", 0, 0, 0)  # link size/off, map off
    header += struct.pack("<II", len(strings), string_ids_off)
    header += struct.pack("<II", len(type_descs), type_ids_off)
    header += struct.pack("<II", len(protos), proto_ids_off)
    header += struct.pack("<II", 0, 0)  # field ids
    header += struct.pack("<II", len(methods), method_ids_off)
    header += struct.pack("<II", 1, class_defs_off)
    header += struct.pack("<II", len(data), data_off)
    assert len(header) == header_size

    body = bytearray()
    for off in string_offs:
        body += struct.pack("<I", off)
    for t in type_descs:
        body += struct.pack("<I", sidx[t])
    for sh, ret in protos:
        body += struct.pack("<III", sidx[sh], tidx[ret], 0)
    for cls_t, proto_i, name_s in methods:
        body += struct.pack("<HHI", cls_t, proto_i, name_s)
    body += struct.pack(
        "<IIIIIIII",
        tidx["LMain;"], 0x1, NO_INDEX, 0, NO_INDEX, 0, class_data_off, 0,
    )

    out = bytearray(header + body + data)
    assert len(out) == file_size
    out[8:12] = struct.pack("<I", zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF)
    return bytes(out)


# --------------------------------------------------------------------------
# Binary XML builder


def axml_string_pool(strings, utf8=False):
    offsets, blob = [], bytearray()
    for s in strings:
        offsets.append(len(blob))
        if utf8:
            enc = s.encode("utf-8")
            assert len(s) < 0x80 and len(enc) < 0x80
            blob += bytes([len(s), len(enc)]) + enc + b"\x00"
        else:
            assert len(s) < 0x8000
            blob += struct.pack("<H", len(s)) + s.encode("utf-16-le") + b"\x00\x00"
    header = 28
    strings_start = header + 4 * len(strings)
    size = strings_start + len(blob)
    pad = (4 - size % 4) % 4
    size += pad
    out = struct.pack(
        "<HHIIIIII",
        0x0001, header, size, len(strings), 0, (1 << 8) if utf8 else 0, strings_start, 0,
    )
    out += b"".join(struct.pack("<I", o) for o in offsets)
    out += bytes(blob) + bytes(pad)
    return out


def axml_chunk(ctype, body):
    return struct.pack("<HHI", ctype, 16, 16 + len(body)) + struct.pack("<II", 1, NO_INDEX) + body


def axml_attr(ns, name, raw, dtype, data):
    return struct.pack("<IIIHBBI", ns, name, raw, 8, 0, dtype, data)


def build_manifest_axml(package, permission, utf8=False):
    ANDROID = "http://schemas.android.com/apk/res/android"
    strings = [
        "android", ANDROID, "manifest", "package", package, "versionCode",
        "uses-permission", "name", permission, "application", "debuggable",
    ]
    s = {v: i for i, v in enumerate(strings)}

    def start(name, attrs):
        body = struct.pack(
            "<IIHHHHHH", NO_INDEX, s[name], 20, 20, len(attrs), 0, 0, 0
        ) + b"".join(attrs)
        return axml_chunk(0x0102, body)

    def end(name):
        return axml_chunk(0x0103, struct.pack("<II", NO_INDEX, s[name]))

    doc = b""
    doc += axml_chunk(0x0100, struct.pack("<II", s["android"], s[ANDROID]))
    doc += start("manifest", [
        axml_attr(NO_INDEX, s["package"], s[package], 0x03, s[package]),
        axml_attr(s[ANDROID], s["versionCode"], NO_INDEX, 0x10, 7),
    ])
    doc += start("uses-permission", [
        axml_attr(s[ANDROID], s["name"], s[permission], 0x03, s[permission]),
    ])
    doc += end("uses-permission")
    doc += start("application", [
        axml_attr(s[ANDROID], s["debuggable"], NO_INDEX, 0x12, 0xFFFFFFFF),
    ])
    doc += end("application")
    doc += end("manifest")
    doc += axml_chunk(0x0101, struct.pack("<II", s["android"], s[ANDROID]))

    pool = axml_string_pool(strings, utf8)
    total = 8 + len(pool) + len(doc)
    return struct.pack("<HHI", 0x0003, 8, total) + pool + doc


def expected_manifest_text(package, permission):
    return (
        '<manifest xmlns:android="http://schemas.android.com/apk/res/android" '
        f'package="{package}" android:versionCode="7">\n'
        f'    <uses-permission android:name="{permission}"/>\n'
        '    <application android:debuggable="true"/>\n'
        "</manifest>\n"
    )


# --------------------------------------------------------------------------
# ZIP assembly


def make_zip(path, members, compression=zipfile.ZIP_DEFLATED):
    """members: list of (name, bytes). Deterministic metadata throughout."""
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, payload in members:
            zi = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            zi.compress_type = compression
            zi.create_system = 0
            zi.external_attr = 0
            zf.writestr(zi, payload)
    path.write_bytes(buf.getvalue())
    return buf.getvalue()


def set_gp_flag(raw: bytes, member: str, flag: int) -> bytes:
    """Set a general-purpose flag bit on one member, in both the local and
    central headers."""
    out = bytearray(raw)
    name = member.encode()
    i = 0
    while True:
        i = out.find(b"PK\x03\x04", i)
        if i < 0:
            break
        nlen = struct.unpack_from("<H", out, i + 26)[0]
        if out[i + 30:i + 30 + nlen] == name:
            out[i + 6:i + 8] = struct.pack(
                "<H", struct.unpack_from("<H", out, i + 6)[0] | flag
            )
        i += 4
    i = 0
    while True:
        i = out.find(b"PK\x01\x02", i)
        if i < 0:
            break
        nlen = struct.unpack_from("<H", out, i + 28)[0]
        if out[i + 46:i + 46 + nlen] == name:
            out[i + 8:i + 10] = struct.pack(
                "<H", struct.unpack_from("<H", out, i + 8)[0] | flag
            )
        i += 4
    return bytes(out)


# --------------------------------------------------------------------------
# Fixture sets

SMS_APIS = [
    ("Landroid/telephony/SmsManager;", "sendTextMessage", "V"),
    ("Landroid/telephony/SmsManager;", "getDefault", "L"),
    ("Ljava/lang/String;", "valueOf", "L"),
]
BENIGN_APIS = [
    ("Landroid/app/Activity;", "onCreate", "V"),
    ("Landroid/util/Log;", "d", "I"),
    ("Ljava/io/File;", "exists", "Z"),
]


def corpus_fixtures():
    rng = random.Random(20260823)
    # Payload sizes spread across the width-table buckets.
    sizes = [4, 12, 36, 70, 110, 220]  # KiB
    for label, apis in (("benign", BENIGN_APIS), ("malicious", SMS_APIS)):
        for i, kb in enumerate(sizes):
            filler = bytes(rng.randrange(256) for _ in range(kb * 1024))
            dex = build_dex(apis, filler=filler)
            package = f"com.fixture.{label}.app{i}"
            permission = (
                "android.permission.SEND_SMS"
                if label == "malicious"
                else "android.permission.INTERNET"
            )
            manifest = build_manifest_axml(package, permission, utf8=i % 2 == 1)
            members = [
                ("classes.dex", dex),
                ("AndroidManifest.xml", manifest),
                ("res/raw/blob.bin", bytes(rng.randrange(256) for _ in range(512))),
            ]
            if i == 3:  # one multidex package per class
                members.insert(1, ("classes2.dex", build_dex(BENIGN_APIS[:1])))
            compression = zipfile.ZIP_STORED if i == 2 else zipfile.ZIP_DEFLATED
            make_zip(
                FIXTURES / "corpus" / label / f"app{i}.apk",
                members,
                compression,
            )


def bad_fixtures():
    bad = FIXTURES / "bad"
    bad.mkdir(parents=True, exist_ok=True)
    dex = build_dex(BENIGN_APIS)
    manifest = build_manifest_axml("com.fixture.bad", "android.permission.INTERNET")
    base_members = [("classes.dex", dex), ("AndroidManifest.xml", manifest)]

    (bad / "not_a_zip.apk").write_bytes(b"This is just prose, not an archive." * 3)

    raw = make_zip(bad / "truncated.apk", base_members)
    (bad / "truncated.apk").write_bytes(raw[: len(raw) - 10])

    # Stored payload with one flipped byte: sizes still match, CRC does not.
    raw = make_zip(bad / "corrupt_crc.apk", base_members, zipfile.ZIP_STORED)
    arr = bytearray(raw)
    at = raw.find(b"dex\n035\x00") + 40
    arr[at] ^= 0xFF
    (bad / "corrupt_crc.apk").write_bytes(arr)

    make_zip(bad / "no_dex.apk", [("AndroidManifest.xml", manifest)])
    make_zip(bad / "no_manifest.apk", [("classes.dex", dex)])

    raw = make_zip(bad / "zip64_marker.apk", base_members)
    arr = bytearray(raw)
    eocd = raw.rfind(b"PK\x05\x06")
    arr[eocd + 8:eocd + 12] = b"\xff\xff\xff\xff"  # entry counts -> sentinel
    (bad / "zip64_marker.apk").write_bytes(arr)

    raw = make_zip(bad / "encrypted_dex.apk", base_members)
    (bad / "encrypted_dex.apk").write_bytes(set_gp_flag(raw, "classes.dex", 0x1))

    make_zip(bad / "bad_magic_dex.apk", [
        ("classes.dex", b"dey\n035\x00" + bytes(0x70)),  # not a DEX magic
        ("AndroidManifest.xml", manifest),
    ])

    expectations = {
        "not_a_zip.apk": "MalformedZip",
        "truncated.apk": "MalformedZip",
        "corrupt_crc.apk": "CrcMismatch",
        "no_dex.apk": "MissingDex",
        "no_manifest.apk": "MissingManifest",
        "zip64_marker.apk": "MalformedZip",
        "encrypted_dex.apk": "MissingDex",
        "bad_magic_dex.apk": "BadMagic",
    }
    (bad / "expectations.json").write_text(
        json.dumps(expectations, indent=2, sort_keys=True) + "\n"
    )


def parser_fixtures():
    # A package that degrades gracefully: its secondary DEX is encrypted and
    # must be skipped with a warning while the rest still converts.
    dex = build_dex(SMS_APIS)
    manifest = build_manifest_axml("com.fixture.app", "android.permission.SEND_SMS")
    raw = make_zip(FIXTURES / "corpus_extra" / "encrypted_extra.apk", [
        ("classes.dex", dex),
        ("classes2.dex", build_dex(BENIGN_APIS[:1])),
        ("AndroidManifest.xml", manifest),
    ])
    (FIXTURES / "corpus_extra" / "encrypted_extra.apk").write_bytes(
        set_gp_flag(raw, "classes2.dex", 0x1)
    )

    d = FIXTURES / "dex"
    d.mkdir(parents=True, exist_ok=True)
    (d / "sms_invoke.dex").write_bytes(dex)
    # Five call sites of one method must still dedupe to one line.
    (d / "dedup5.dex").write_bytes(
        build_dex([SMS_APIS[0]] * 5, referenced=[("Landroid/net/Uri;", "parse", "L")])
    )

    a = FIXTURES / "axml"
    a.mkdir(parents=True, exist_ok=True)
    (a / "manifest.axml").write_bytes(
        build_manifest_axml("com.fixture.app", "android.permission.SEND_SMS")
    )
    (a / "manifest_utf8.axml").write_bytes(
        build_manifest_axml("com.fixture.app", "android.permission.SEND_SMS", utf8=True)
    )

    g = FIXTURES / "golden"
    g.mkdir(parents=True, exist_ok=True)
    (g / "manifest.txt").write_text(
        expected_manifest_text("com.fixture.app", "android.permission.SEND_SMS")
    )
    # Hand-derived: sorted, deduplicated platform calls of sms_invoke.dex.
    (g / "api_sms.txt").write_text(
        "Landroid/telephony/SmsManager;->getDefault(L)\n"
        "Landroid/telephony/SmsManager;->sendTextMessage(V)\n"
        "Ljava/lang/String;->valueOf(L)\n"
    )
    (g / "api_dedup5.txt").write_text(
        "Landroid/telephony/SmsManager;->sendTextMessage(V)\n"
    )


def main():
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    corpus_fixtures()
    bad_fixtures()
    parser_fixtures()
    total = sum(f.stat().st_size for f in FIXTURES.rglob("*") if f.is_file())
    count = sum(1 for f in FIXTURES.rglob("*") if f.is_file())
    print(f"wrote {count} fixture files, {total / 1024:.0f} KiB total")


if __name__ == "__main__":
    main()
