mod common;

use hodgeloop::boundary::{boundary_maps, edge_boundary};
use hodgeloop::{Complex2, ComplexKind, HodgeSystem, WeightOptions, WeightSeed, WeightVector};
use proptest::prelude::*;

use common::*;

#[test]
fn single_edge_and_triangle_columns() {
    let cx = Complex2::new(ComplexKind::Simplicial, 3, vec![[0, 1], [0, 2], [1, 2]], vec![vec![0, 1, 2]]).unwrap();
    let b1 = dense_int(&edge_boundary(&cx));
    // column for [x, y] = [0, 1]
    assert_eq!((b1[0][0], b1[1][0], b1[2][0]), (1, -1, 0));
    let (_, b2) = boundary_maps(&cx, 1).unwrap();
    let b2 = dense_int(&b2);
    // rows are [0,1], [0,2], [1,2]
    assert_eq!([b2[0][0], b2[2][0], b2[1][0]], [1, 1, -1]);
}

fn int_product(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter().map(|row| (0..cols).map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum()).collect()).collect()
}

fn spectrum(b1: &hodgeloop::BoundaryMatrix, b2: &hodgeloop::BoundaryMatrix, w2: &[f64], kind: ComplexKind) -> Vec<f64> {
    let seed = WeightSeed::Top(WeightVector::new(2, w2.to_vec()).unwrap());
    let sys = HodgeSystem::assemble(1, b1, b2, seed, kind, &WeightOptions::default()).unwrap();
    dense_eigenvalues(&sys.laplacian().to_dense())
}

proptest! {
    #[test]
    fn boundary_of_boundary_vanishes(seed in 0u64..1000, cubical in any::<bool>()) {
        let mut r = rng(seed);
        let cx = if cubical { random_cubical(&mut r, 5, 6, 0.7) } else { random_simplicial(&mut r, 12, 0.5, 0.6) };
        let (b1, b2) = boundary_maps(&cx, 1).unwrap();
        let prod = int_product(&dense_int(&b1), &dense_int(&b2));
        prop_assert!(prod.iter().flatten().all(|&v| v == 0));
        prop_assert!(b1.column_counts().iter().all(|&c| c == 2));
        let faces = if cubical { 4 } else { 3 };
        prop_assert!(b2.column_counts().iter().all(|&c| c == faces));
        prop_assert!(b1.compose(&b2).unwrap().is_empty());
    }

    #[test]
    fn reorientation_leaves_spectrum_unchanged(seed in 0u64..300, flip_mask in any::<u64>()) {
        let mut r = rng(seed);
        let cx = random_simplicial(&mut r, 9, 0.6, 0.7);
        prop_assume!(cx.n1() > 0);
        let (b1, b2) = boundary_maps(&cx, 1).unwrap();
        let w2: Vec<f64> = (0..cx.n2()).map(|i| 0.3 + 0.1 * (i % 5) as f64).collect();
        let before = spectrum(&b1, &b2, &w2, cx.kind());
        let (mut f1, mut f2) = (b1.clone(), b2.clone());
        for e in 0..cx.n1() {
            if flip_mask >> (e % 64) & 1 == 1 {
                f1.negate_col(e);
                f2.negate_row(e);
            }
        }
        for t in 0..cx.n2() {
            if flip_mask >> ((t + 7) % 64) & 1 == 1 {
                f2.negate_col(t);
            }
        }
        let after = spectrum(&f1, &f2, &w2, cx.kind());
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
