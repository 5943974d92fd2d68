use std::collections::BTreeSet;

use fmm2d::generate::{Distribution, UniformDistribution};
use fmm2d::quadtree::{morton_decode, morton_encode};
use fmm2d::{Charge, Depth, MortonKey, Quadtree};
use proptest::prelude::*;

fn all_keys(level: u8) -> impl Iterator<Item = MortonKey> {
    (0..1u64 << (2 * level)).map(move |i| MortonKey::new(level, i).unwrap())
}

/// Chebyshev distance between two same-level cells, from their coordinates.
fn cheb(a: MortonKey, b: MortonKey) -> u32 {
    let (ax, ay) = morton_decode(a);
    let (bx, by) = morton_decode(b);
    ax.abs_diff(bx).max(ay.abs_diff(by))
}

/// Interaction list by enumeration: same-level cells whose parents are
/// within one cell of each other and which are themselves at least two
/// cells away.
fn brute_interaction_list(key: MortonKey) -> BTreeSet<MortonKey> {
    if key.level < 2 {
        return BTreeSet::new();
    }
    let parent = key.ancestor(key.level - 1);
    all_keys(key.level)
        .filter(|&c| {
            let cp = c.ancestor(key.level - 1);
            cheb(cp, parent) <= 1 && cheb(c, key) >= 2
        })
        .collect()
}

#[test]
fn interaction_list_matches_enumeration() {
    for level in 1..=4u8 {
        for key in all_keys(level) {
            let got: BTreeSet<_> = key.interaction_list().into_iter().collect();
            assert_eq!(got, brute_interaction_list(key), "{key:?}");
            assert!(got.len() <= 27);
        }
    }
    assert_eq!(
        brute_interaction_list(morton_encode(2, 0, 0).unwrap()).len(),
        12
    );
    assert_eq!(
        brute_interaction_list(morton_encode(4, 6, 9).unwrap()).len(),
        27
    );
}

#[test]
fn lists_are_symmetric() {
    for level in 0..=4u8 {
        for a in all_keys(level) {
            for b in a.neighbors() {
                assert!(b.neighbors().contains(&a));
            }
            for b in a.interaction_list() {
                assert!(b.interaction_list().contains(&a));
                assert!(!a.is_adjacent(b) && a != b);
            }
            assert!(a.neighbors().len() <= 8);
        }
    }
}

/// Every pair of distinct leaves is either adjacent or linked by exactly one
/// ancestor pair in an interaction list.
#[test]
fn leaf_pairs_are_covered_exactly_once() {
    for depth in 2..=4u8 {
        for a in all_keys(depth) {
            for b in all_keys(depth) {
                if a == b {
                    continue;
                }
                let near = a.neighbors().contains(&b) as usize;
                let far = (2..=depth)
                    .filter(|&l| {
                        let (pa, pb) = (a.ancestor(l), b.ancestor(l));
                        pa.interaction_list().contains(&pb)
                    })
                    .count();
                assert_eq!(near + far, 1, "depth {depth}: {a:?} {b:?}");
            }
        }
    }
}

#[test]
fn auto_depth_for_thousand_uniform() {
    let ps = UniformDistribution.generate(1000, 3).unwrap();
    let t = Quadtree::build(&ps, Depth::Auto, 30.0).unwrap();
    // round(log4(1000 / 30)) = round(2.53)
    assert_eq!(t.depth(), 3);
}

fn check_tree(t: &Quadtree) {
    // sorted by leaf index
    let mut last = 0;
    for leaf in t.leaves() {
        for _ in leaf.range.clone() {
            assert!(leaf.key.index >= last);
            last = leaf.key.index;
        }
    }
    // leaf ranges partition the array
    let mut cursor = 0;
    for leaf in t.leaves() {
        assert_eq!(leaf.range.start, cursor);
        cursor = leaf.range.end;
    }
    assert_eq!(cursor, t.len());
    // child counts sum to the parent
    for level in 0..t.depth() {
        for cell in t.level(level) {
            let kids: usize = cell.key.children().iter().map(|&c| t.count(c)).sum();
            assert_eq!(kids, cell.count());
        }
    }
    // containment in the half-open leaf square
    let w = t.cell_width(t.depth());
    for leaf in t.leaves() {
        let c = t.cell_center(leaf.key);
        for p in t.cell_particles(leaf.key) {
            // slack for the rounding of the center computation itself
            let eps = 1e-15 * (p.z.norm() + w);
            assert!(
                p.z.re >= c.re - w / 2.0 - eps && p.z.re < c.re + w / 2.0 + eps,
                "{p:?}"
            );
            assert!(
                p.z.im >= c.im - w / 2.0 - eps && p.z.im < c.im + w / 2.0 + eps,
                "{p:?}"
            );
        }
    }
    // the permutation is a bijection
    let mut seen = vec![false; t.len()];
    for &i in t.order() {
        assert!(!seen[i]);
        seen[i] = true;
    }
}

proptest! {
    #[test]
    fn encode_decode_round_trip(level in 0u8..=16, ix in any::<u32>(), iy in any::<u32>()) {
        let side = 1u32 << level;
        let (ix, iy) = (ix % side, iy % side);
        let k = morton_encode(level, ix, iy).unwrap();
        prop_assert!(k.index < 1u64 << (2 * u32::from(level)));
        prop_assert_eq!(morton_decode(k), (ix, iy));
    }

    #[test]
    fn tree_invariants(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..200),
        depth in 1u8..=5,
    ) {
        let ps: Vec<Charge> = pts.iter().map(|&(x, y)| Charge::real(x, y, 1.0)).collect();
        let t = Quadtree::build(&ps, Depth::Fixed(depth), 30.0).unwrap();
        check_tree(&t);
        // stable sort: equal-key particles keep input order
        for leaf in t.leaves() {
            let idx = &t.order()[leaf.range.clone()];
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
