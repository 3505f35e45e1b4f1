use std::f64::consts::FRAC_PI_2;

use sifbm_core::flows::{flows_through, uniform_grid, ElementaryFlow, Flow, SimpleFlow};
use sifbm_core::gaussian::{sample_ensemble, GaussianField, SampleEnsemble};
use sifbm_core::index::tiling;
use sifbm_core::linalg::JitterPolicy;
use sifbm_core::measure::{
    characterize, AdditivityCase, Battery, CoverFamily, Criterion, ExtensionCase, Thresholds,
};
use sifbm_core::rng::row_stream;
use sifbm_core::{Error, HurstParam, LeftNeighborhood, Rect};

use rand_distr::{Distribution, StandardNormal};

fn r(c: &[f64]) -> Rect {
    Rect::new(c.to_vec()).unwrap()
}

fn battery(points: usize) -> Battery {
    let u = r(&[2.0, 2.0]);
    let curved = ElementaryFlow::from_fn(uniform_grid(0.0, 1.0, points), |t| {
        vec![2.0 * (FRAC_PI_2 * t).sin(), 2.0 * t * t]
    })
    .unwrap();
    let first = ElementaryFlow::from_fn(uniform_grid(0.0, 1.0, points / 2), |t| vec![2.0 * t, 1.0 * t]).unwrap();
    let second = ElementaryFlow::from_fn(uniform_grid(1.0, 2.0, points / 2), |s| vec![1.0, s]).unwrap();
    let simple = SimpleFlow::new(vec![0.0, 1.0, 2.0], vec![first, second]).unwrap();
    let flows: Vec<Flow> = vec![
        flows_through(&u, points).unwrap().into(),
        ElementaryFlow::power_curve(&u, &[1.0, 2.0], points).unwrap().into(),
        curved.into(),
        simple.into(),
    ];
    let coarse = tiling(&u, &[vec![1.0], vec![1.0]]).unwrap();
    let fine = tiling(&u, &[vec![0.5, 1.0, 1.5], vec![1.0]]).unwrap();
    let mut with_u = coarse.clone();
    with_u.push(LeftNeighborhood::from_rect(u.clone()));
    let extension = vec![
        ExtensionCase { target: u.clone(), covers: CoverFamily::new(with_u).unwrap() },
        ExtensionCase { target: u.clone(), covers: CoverFamily::new(fine).unwrap() },
    ];
    let additivity = vec![
        AdditivityCase {
            first: coarse[0].clone(),
            second: coarse[1].clone(),
            union: LeftNeighborhood::cell(&[0.0, 0.0], &[2.0, 1.0]).unwrap(),
        },
        AdditivityCase {
            first: coarse[1].clone(),
            second: coarse[3].clone(),
            union: LeftNeighborhood::cell(&[1.0, 0.0], &[2.0, 2.0]).unwrap(),
        },
    ];
    let lattice = [0.5, 1.0, 1.5, 2.0];
    let measure_indices = lattice.iter().flat_map(|&a| lattice.iter().map(move |&b| r(&[a, b]))).collect();
    Battery { flows, extension, additivity, measure_indices }
}

fn exact(b: &Battery, h: f64, n: usize, seed: u64) -> SampleEnsemble {
    let field = GaussianField::new(&b.required_indices().unwrap(), HurstParam::new(h).unwrap(), &JitterPolicy::default()).unwrap();
    sample_ensemble(&field, n, seed).unwrap()
}

/// Same marginals, no dependence between indices.
fn independent(e: &SampleEnsemble, h: f64, seed: u64) -> SampleEnsemble {
    let k = e.n_indices();
    let sd: Vec<f64> = e.indices().iter().map(|r| r.measure().powf(h)).collect();
    let mut values = Vec::with_capacity(e.n_samples() * k);
    for s in 0..e.n_samples() {
        let mut rng = row_stream(seed, 99, s as u64);
        for sdj in &sd {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(z * sdj);
        }
    }
    SampleEnsemble::new(e.indices().to_vec(), e.n_samples(), values, None, None).unwrap()
}

fn shifted(e: &SampleEnsemble, col: usize, by: f64) -> SampleEnsemble {
    let k = e.n_indices();
    let mut values = e.values().to_vec();
    for s in 0..e.n_samples() {
        values[s * k + col] += by;
    }
    SampleEnsemble::new(e.indices().to_vec(), e.n_samples(), values, None, None).unwrap()
}

#[test]
fn exact_passes_and_corruptions_fail() {
    let b = battery(24);
    let h = HurstParam::new(0.3).unwrap();
    let th = Thresholds::default();
    let e = exact(&b, 0.3, 4000, 11);

    let report = characterize(&e, &b, h, &th).unwrap();
    assert!(report.verdict, "{:#?}", report.criteria);
    assert_eq!(report.flows.len(), 4);
    assert!(report.extension_residuals.iter().all(|r| r.is_finite()));

    let wrong_h = characterize(&e, &b, HurstParam::new(0.45).unwrap(), &th).unwrap();
    assert!(wrong_h.failed().contains(&Criterion::VarianceProfile));

    let iid = characterize(&independent(&e, 0.3, 5), &b, h, &th).unwrap();
    assert!(iid.failed().contains(&Criterion::VarianceProfile));

    let unit = e.index_of(&r(&[1.0, 1.0])).unwrap();
    let moved = characterize(&shifted(&e, unit, 0.5), &b, h, &th).unwrap();
    assert!(moved.failed().contains(&Criterion::Centering));
}

#[test]
fn preconditions() {
    let b = battery(8);
    let h = HurstParam::new(0.3).unwrap();
    let small = exact(&b, 0.3, 500, 1);
    assert!(matches!(
        characterize(&small, &b, h, &Thresholds::default()),
        Err(Error::TooFewSamples { needed: 1000, got: 500 })
    ));
    let e = exact(&b, 0.3, 1000, 1);
    let mut wider = b.clone();
    wider.measure_indices.push(r(&[3.0, 3.0]));
    assert!(matches!(characterize(&e, &wider, h, &Thresholds::default()), Err(Error::MissingIndices(m)) if m.len() == 1));
}
