//! Marching-cubes case table, derived from face-crossing segments instead of
//! being transcribed.
//!
//! Corner `c` sits at offset `(c & 1, c >> 1 & 1, c >> 2 & 1)`; a set bit in
//! the case index marks a corner below the iso level. On every cube face the
//! crossings are joined so that negative corners are cut off separately. The
//! rule depends only on the face's corner signs, so neighbouring cells agree
//! and the surface is closed. Segments are oriented with the negative side on
//! their right as seen from outside the cube, which makes every loop wind
//! counter-clockwise around the outward (positive-side) normal.

use std::sync::LazyLock;

/// Edge `e` joins `EDGES[e].0` and `EDGES[e].1`, which differ along `EDGES[e].2`.
pub(crate) const EDGES: [(usize, usize, usize); 12] = build_edges();

const fn build_edges() -> [(usize, usize, usize); 12] {
    let mut out = [(0, 0, 0); 12];
    let mut n = 0;
    let mut axis = 0;
    while axis < 3 {
        let mut c = 0;
        while c < 8 {
            if c >> axis & 1 == 0 {
                out[n] = (c, c | 1 << axis, axis);
                n += 1;
            }
            c += 1;
        }
        axis += 1;
    }
    out
}

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    EDGES.iter().position(|e| e.0 == lo && e.1 == hi).expect("adjacent corners")
}

fn corner(coords: [usize; 3]) -> usize {
    coords[0] | coords[1] << 1 | coords[2] << 2
}

/// Corners of each face, counter-clockwise about its outward normal.
fn faces() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let mut quad = [0; 4];
            for (n, (x, y)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                let mut p = [0; 3];
                p[axis] = side;
                p[b] = x;
                p[c] = y;
                quad[n] = corner(p);
            }
            if side == 0 {
                quad.reverse();
            }
            out.push(quad);
        }
    }
    out
}

fn triangulate(case: usize, faces: &[[usize; 4]]) -> Vec<[u8; 3]> {
    let inside = |c: usize| case >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for quad in faces {
        // crossings in traversal order, tagged with whether the walk enters
        // the negative region there
        let mut crossings = Vec::with_capacity(4);
        for n in 0..4 {
            let (a, b) = (quad[n], quad[(n + 1) % 4]);
            if inside(a) != inside(b) {
                crossings.push((edge_between(a, b), inside(b)));
            }
        }
        for n in 0..crossings.len() {
            let (edge, enters) = crossings[n];
            if enters {
                let (exit, _) = crossings[(n + 1) % crossings.len()];
                next[edge] = exit;
            }
        }
    }
    let mut seen = [false; 12];
    let mut tris = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut chain = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            chain.push(e as u8);
            e = next[e];
        }
        debug_assert_eq!(e, start);
        for n in 1..chain.len() - 1 {
            tris.push([chain[0], chain[n], chain[n + 1]]);
        }
    }
    tris
}

static CASES: LazyLock<Vec<Vec<[u8; 3]>>> = LazyLock::new(|| {
    let faces = faces();
    (0..256).map(|case| triangulate(case, &faces)).collect()
});

/// Triangles (as edge triples) for a corner-sign case.
pub(crate) fn case_triangles(case: usize) -> &'static [[u8; 3]] {
    &CASES[case]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases_are_empty() {
        assert!(case_triangles(0).is_empty());
        assert!(case_triangles(255).is_empty());
    }

    #[test]
    fn single_corner_is_one_triangle() {
        for c in 0..8 {
            assert_eq!(case_triangles(1 << c).len(), 1);
            assert_eq!(case_triangles(255 ^ (1 << c)).len(), 1);
        }
    }

    #[test]
    fn counts_match_classic_table() {
        // triangle counts of a few well-known configurations
        assert_eq!(case_triangles(0b0000_0011).len(), 2);
        assert_eq!(case_triangles(0b0000_1111).len(), 2);
        assert_eq!(case_triangles(0b1000_0001).len(), 2);
        let total: usize = (0..256).map(|c| case_triangles(c).len()).sum();
        assert!(total > 0);
    }

    #[test]
    fn loops_are_closed() {
        // every edge used by a case appears in exactly two triangle sides
        // counted over its loop boundary: boundary edges pair up with the
        // neighbouring cell, so each crossing edge must occur in some triangle
        for case in 1..255usize {
            let inside = |c: usize| case >> c & 1 == 1;
            for (e, (a, b, _)) in EDGES.iter().enumerate() {
                let crosses = inside(*a) != inside(*b);
                let used = case_triangles(case).iter().any(|t| t.contains(&(e as u8)));
                assert_eq!(crosses, used, "case {case} edge {e}");
            }
        }
    }

    #[test]
    fn single_corner_normal_points_away() {
        // corner 0 inside: the normal must point toward (1, 1, 1)
        let mid = |e: usize| {
            let (a, b, _) = EDGES[e];
            [0, 1, 2].map(|k| ((a >> k & 1) + (b >> k & 1)) as f64 / 2.0)
        };
        let t = case_triangles(1)[0];
        let [p, q, r] = t.map(|e| mid(e as usize));
        let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
        let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        assert!(n[0] > 0.0 && n[1] > 0.0 && n[2] > 0.0, "{n:?}");
    }
}
