#!/usr/bin/env python3
"""Independent Canny reference for the 32x32 centered-square golden.

Implements the documented step definitions directly (integer 5x5
Gaussian over 159 with round-half-up, 3x3 Sobel with clamped borders,
tan-binned non-maximum suppression with out-of-bounds magnitude 0,
double threshold 100/200, 8-connected hysteresis) and prints the sorted
edge-pixel coordinates. Run from the repo root:

    python3 tools/canny_square_golden.py
"""
import math

W = H = 32
img = [[0] * W for _ in range(H)]
for y in range(11, 21):
    for x in range(11, 21):
        img[y][x] = 255

def clamped(g, x, y):
    return g[min(max(y, 0), H - 1)][min(max(x, 0), W - 1)]

GAUSS = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
]
blur = [[0] * W for _ in range(H)]
for y in range(H):
    for x in range(W):
        num = sum(
            GAUSS[dy + 2][dx + 2] * clamped(img, x + dx, y + dy)
            for dy in range(-2, 3)
            for dx in range(-2, 3)
        )
        blur[y][x] = (2 * num + 159) // (2 * 159)

gx = [[0] * W for _ in range(H)]
gy = [[0] * W for _ in range(H)]
for y in range(H):
    for x in range(W):
        p = lambda dx, dy: clamped(blur, x + dx, y + dy)
        gx[y][x] = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1))
        gy[y][x] = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1))

mag = [[math.hypot(gx[y][x], gy[y][x]) for x in range(W)] for y in range(H)]
TAN_22_5 = 0.414_213_562_373_095_1
TAN_67_5 = 2.414_213_562_373_095

def mag_at(x, y):
    if 0 <= x < W and 0 <= y < H:
        return mag[y][x]
    return 0.0

nms = [[0.0] * W for _ in range(H)]
for y in range(H):
    for x in range(W):
        m = mag[y][x]
        if m == 0.0:
            continue
        ax, ay = abs(gx[y][x]), abs(gy[y][x])
        if ay < ax * TAN_22_5:
            dx, dy = 1, 0
        elif ay >= ax * TAN_67_5:
            dx, dy = 0, 1
        elif gx[y][x] * gy[y][x] > 0:
            dx, dy = 1, 1
        else:
            dx, dy = 1, -1
        if m >= mag_at(x + dx, y + dy) and m >= mag_at(x - dx, y - dy):
            nms[y][x] = m

LOW, HIGH = 100.0, 200.0
state = [[0] * W for _ in range(H)]
stack = []
for y in range(H):
    for x in range(W):
        if nms[y][x] >= HIGH:
            state[y][x] = 2
            stack.append((x, y))
        elif nms[y][x] >= LOW:
            state[y][x] = 1
while stack:
    x, y = stack.pop()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            nx, ny = x + dx, y + dy
            if (dx or dy) and 0 <= nx < W and 0 <= ny < H and state[ny][nx] == 1:
                state[ny][nx] = 2
                stack.append((nx, ny))

edges = sorted((x, y) for y in range(H) for x in range(W) if state[y][x] == 2)
print(f"{len(edges)} edge pixels")
print(", ".join(f"({x},{y})" for x, y in edges))
for y in range(H):
    print("".join("#" if state[y][x] == 2 else "." for x in range(W)))
