use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sifbm_core::gaussian::{build_cov_matrix, covariance};
use sifbm_core::index::{left_nbhd_measure, union_measure, Lebesgue};
use sifbm_core::measure::{outer_measure, outer_measure_of, CoverFamily, PreMeasureTable};
use sifbm_core::{HurstParam, LeftNeighborhood, Rect, RectUnion};

fn corner(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..=8, dim).prop_map(|v| v.into_iter().map(|x| x as f64 * 0.25).collect())
}

fn rects(dim: usize, max: usize) -> impl Strategy<Value = Vec<Rect>> {
    prop::collection::vec(corner(dim).prop_map(|c| Rect::new(c).unwrap()), 1..=max)
}

fn hurst() -> impl Strategy<Value = HurstParam> {
    prop::sample::select(vec![0.1, 0.2, 0.35, 0.5]).prop_map(|h| HurstParam::new(h).unwrap())
}

fn inside(p: &[f64], r: &Rect) -> bool {
    r.corner().is_some_and(|c| p.iter().zip(c).all(|(x, t)| x <= t))
}

/// Exact measure by enumerating the cells of the coordinate grid.
fn grid_measure(dim: usize, all: &[Rect], member: impl Fn(&[f64]) -> bool) -> f64 {
    let mut axes: Vec<Vec<f64>> = (0..dim).map(|_| vec![0.0]).collect();
    for r in all {
        for (a, &x) in axes.iter_mut().zip(r.corner().unwrap()) {
            a.push(x);
        }
    }
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
        a.dedup();
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; dim];
    'cells: loop {
        if idx.iter().zip(&axes).all(|(&i, a)| i + 1 < a.len()) {
            let mid: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| 0.5 * (a[i] + a[i + 1])).collect();
            if member(&mid) {
                total += idx.iter().zip(&axes).map(|(&i, a)| a[i + 1] - a[i]).product::<f64>();
            }
        }
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] + 1 < axes[d].len() {
                continue 'cells;
            }
            idx[d] = 0;
        }
        break;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_symmetric_and_psd(dim in 1usize..=3, h in hurst(), idx in (1usize..=3).prop_flat_map(|d| rects(d, 12))) {
        let idx: Vec<Rect> = idx.into_iter().map(|r| {
            let c = r.corner().unwrap();
            Rect::new((0..dim).map(|i| *c.get(i).unwrap_or(&1.0)).collect()).unwrap()
        }).collect();
        let c = build_cov_matrix(&idx, h).unwrap();
        let k = idx.len();
        for i in 0..k {
            for j in 0..k {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                prop_assert_eq!(c.get(i, j), covariance(&idx[i], &idx[j], h).unwrap());
            }
        }
        let m = DMatrix::from_fn(k, k, |i, j| c.get(i, j));
        let min = m.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10 * c.matrix().max_diag(), "min eigenvalue {}", min);
    }

    #[test]
    fn increment_distance_obeys_triangle_inequality(h in hurst(), t in rects(2, 3)) {
        prop_assume!(t.len() == 3);
        let d = |a: &Rect, b: &Rect| {
            let v = covariance(a, a, h).unwrap() + covariance(b, b, h).unwrap() - 2.0 * covariance(a, b, h).unwrap();
            v.max(0.0).sqrt()
        };
        prop_assert!(d(&t[0], &t[2]) <= d(&t[0], &t[1]) + d(&t[1], &t[2]) + 1e-12);
    }

    #[test]
    fn union_measure_matches_cell_count(parts in rects(2, 7)) {
        let exact = grid_measure(2, &parts, |p| parts.iter().any(|r| inside(p, r)));
        let got = union_measure(&RectUnion::new(parts).unwrap()).unwrap();
        prop_assert!((got - exact).abs() <= 1e-12 * exact.max(1.0), "{} vs {}", got, exact);
    }

    #[test]
    fn left_nbhd_matches_cell_count(base in corner(3), cut in rects(3, 5)) {
        let base = Rect::new(base).unwrap();
        let c = LeftNeighborhood::new(base.clone(), cut.clone()).unwrap();
        let mut all = cut.clone();
        all.push(base.clone());
        let exact = grid_measure(3, &all, |p| inside(p, &base) && !cut.iter().any(|r| inside(p, r)));
        let got = left_nbhd_measure(&c).unwrap();
        prop_assert!((got - exact).abs() <= 1e-12 * exact.max(1.0), "{} vs {}", got, exact);
    }

    #[test]
    fn outer_measure_monotone_and_subadditive(
        members in prop::collection::vec((corner(2), rects(2, 2)), 1..=6),
        a in corner(2),
        b in corner(2),
    ) {
        let mut sets: Vec<LeftNeighborhood> = members
            .into_iter()
            .map(|(base, cut)| LeftNeighborhood::new(Rect::new(base).unwrap(), cut).unwrap())
            .collect();
        sets.push(LeftNeighborhood::from_rect(Rect::new(vec![2.0, 2.0]).unwrap()));
        let covers = CoverFamily::new(sets.clone()).unwrap();
        let (a, b) = (Rect::new(a).unwrap(), Rect::new(b).unwrap());
        let ab = a.intersection(&b).unwrap();
        let table = PreMeasureTable::analytic_for(HurstParam::new(0.3).unwrap(), &Lebesgue { dim: 2 }, &sets, &[]).unwrap();
        let oa = outer_measure(&table, &covers, &a).unwrap();
        let ob = outer_measure(&table, &covers, &b).unwrap();
        prop_assert!(outer_measure(&table, &covers, &ab).unwrap() <= oa.min(ob) + 1e-12);
        let both = outer_measure_of(
            &table,
            &covers,
            &[LeftNeighborhood::from_rect(a.clone()), LeftNeighborhood::from_rect(b.clone())],
        ).unwrap();
        prop_assert!(both.value <= oa + ob + 1e-12);
        prop_assert!(both.value + 1e-12 >= oa.max(ob));
        prop_assert!(oa + 1e-12 >= a.measure());
    }
}

#[test]
fn union_measure_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let parts: Vec<Rect> = (0..rng.random_range(1..6))
            .map(|_| Rect::new((0..3).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap())
            .collect();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
                parts.iter().any(|r| inside(&p, r))
            })
            .count();
        let p = hits as f64 / n as f64;
        let est = 8.0 * p;
        let se = 8.0 * (p * (1.0 - p) / n as f64).sqrt();
        let got = union_measure(&RectUnion::new(parts).unwrap()).unwrap();
        assert!((got - est).abs() <= 5.0 * se + 1e-9, "{got} vs {est} ± {se}");
    }
}
