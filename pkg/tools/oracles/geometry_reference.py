#!/usr/bin/env python3
"""Library-free reference for the diversity geometry numbers.

Everything here is computed with stdlib-only code, independently of the
package implementation (which uses numpy SVD and qhull): deterministic
text embeddings, PCA via a Jacobi eigensolver, convex hull measure via
brute-force facet enumeration, and mean distance to centroid.

Generation commands (run from the repository root):

    python3 tools/oracles/geometry_reference.py \
        --items tests/fixtures/oracles/diversity_items.txt \
        --out tests/fixtures/oracles/diversity_oracle.json

    python3 tools/oracles/geometry_reference.py \
        --pair tests/fixtures/oracles/similarity_pair.txt \
        --out tests/fixtures/oracles/similarity_oracle.json

The frozen JSON files are checked in; tests compare the package output
against them.
"""
import argparse
import hashlib
import json
import math

EMBED_DIM = 32

_MASK = (1 << 64) - 1


def splitmix64(seed):
    """Documented PRNG: yields uniforms in [-1, 1)."""
    state = seed & _MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        z = z ^ (z >> 31)
        yield 2.0 * ((z >> 11) * (2.0 ** -53)) - 1.0


def embed(text, dim=EMBED_DIM):
    """Deterministic unit vector: sha256 seeds SplitMix64, L2-normalized."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    gen = splitmix64(seed)
    vec = [next(gen) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return [x / norm for x in vec]


def centroid(points):
    dim = len(points[0])
    n = len(points)
    return [sum(p[i] for p in points) / n for i in range(dim)]


def mean_distance_to_centroid(points):
    c = centroid(points)
    total = 0.0
    for p in points:
        total += math.sqrt(sum((p[i] - c[i]) ** 2 for i in range(len(c))))
    return total / len(points)


def jacobi_eigh(matrix):
    """Eigenvalues/vectors of a symmetric matrix by cyclic Jacobi rotations."""
    n = len(matrix)
    a = [row[:] for row in matrix]
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    for _ in range(100):
        off = math.sqrt(sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < 1e-14:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-18:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    eigenvalues = [a[i][i] for i in range(n)]
    eigenvectors = [[v[i][j] for i in range(n)] for j in range(n)]  # row j = eigvec j
    order = sorted(range(n), key=lambda j: -eigenvalues[j])
    return [eigenvalues[j] for j in order], [eigenvectors[j] for j in order]


def pca_project(points, k):
    """Center, take top-k principal axes, project."""
    n = len(points)
    dim = len(points[0])
    c = centroid(points)
    centered = [[p[i] - c[i] for i in range(dim)] for p in points]
    cov = [[sum(row[i] * row[j] for row in centered) / (n - 1) for j in range(dim)]
           for i in range(dim)]
    _, axes = jacobi_eigh(cov)
    return [[sum(row[i] * axis[i] for i in range(dim)) for axis in axes[:k]]
            for row in centered]


def _affine_rank(points, tol=1e-12):
    """Rank of the centered point set via stdlib Gaussian elimination."""
    c = centroid(points)
    rows = [[p[i] - c[i] for i in range(len(c))] for p in points]
    rank = 0
    cols = len(rows[0]) if rows else 0
    row_index = 0
    for col in range(cols):
        pivot = None
        best = tol
        for r in range(row_index, len(rows)):
            if abs(rows[r][col]) > best:
                best = abs(rows[r][col])
                pivot = r
        if pivot is None:
            continue
        rows[row_index], rows[pivot] = rows[pivot], rows[row_index]
        for r in range(len(rows)):
            if r != row_index and abs(rows[r][col]) > 0:
                factor = rows[r][col] / rows[row_index][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[row_index])]
        rank += 1
        row_index += 1
    return rank


def hull_area_2d(points):
    """Brute force: every segment with all points on one side is a hull edge."""
    if len(points) < 3 or _affine_rank(points) < 2:
        return 0.0
    hull = set()
    n = len(points)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ax, ay = points[i]
            bx, by = points[j]
            left = right = 0
            for k in range(n):
                if k in (i, j):
                    continue
                cross = (bx - ax) * (points[k][1] - ay) - (by - ay) * (points[k][0] - ax)
                if cross > 1e-12:
                    left += 1
                elif cross < -1e-12:
                    right += 1
            if left == 0 or right == 0:
                hull.add(i)
                hull.add(j)
    vertices = [points[i] for i in hull]
    cx, cy = centroid(vertices)
    vertices.sort(key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
    area = 0.0
    for idx in range(len(vertices)):
        x1, y1 = vertices[idx]
        x2, y2 = vertices[(idx + 1) % len(vertices)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def hull_volume_3d(points):
    """Brute force: every triangle with all points on one side is a facet."""
    if len(points) < 4 or _affine_rank(points) < 3:
        return 0.0
    n = len(points)
    c = centroid(points)
    volume = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, d = points[i], points[j], points[k]
                u = [b[t] - a[t] for t in range(3)]
                w = [d[t] - a[t] for t in range(3)]
                normal = [u[1] * w[2] - u[2] * w[1],
                          u[2] * w[0] - u[0] * w[2],
                          u[0] * w[1] - u[1] * w[0]]
                pos = neg = flat = 0
                for m in range(n):
                    if m in (i, j, k):
                        continue
                    side = sum(normal[t] * (points[m][t] - a[t]) for t in range(3))
                    if side > 1e-12:
                        pos += 1
                    elif side < -1e-12:
                        neg += 1
                    else:
                        flat += 1
                if pos and neg:
                    continue
                if flat:
                    raise ValueError("points are not in general position; "
                                     "this reference needs simplicial facets")
                # facet: tetrahedron against the centroid
                height = abs(sum(normal[t] * (c[t] - a[t]) for t in range(3)))
                volume += height / 6.0
    return volume


def cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def diversity_reference(items):
    vectors = [embed(item) for item in items]
    mdc = mean_distance_to_centroid(vectors)
    k = 3 if len(items) >= 4 else 2
    projected = pca_project(vectors, k)
    chv = hull_volume_3d(projected) if k == 3 else hull_area_2d(projected)
    return {"items": items, "embed_dim": EMBED_DIM, "projection_k": k,
            "chv": chv, "mdc": mdc}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--items", help="file with one item per line (diversity reference)")
    parser.add_argument("--pair", help="file with two sections split by a --- line (cosine reference)")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    if args.items:
        with open(args.items, encoding="utf-8") as fh:
            items = [line.strip() for line in fh if line.strip()]
        result = diversity_reference(items)
    elif args.pair:
        with open(args.pair, encoding="utf-8") as fh:
            first, second = fh.read().split("\n---\n")
        result = {"cosine": cosine(embed(first.strip()), embed(second.strip())),
                  "embed_dim": EMBED_DIM}
    else:
        parser.error("one of --items / --pair is required")
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
