use sifbm::battery::standard_battery;
use sifbm::sample::sample_field;
use sifbm_core::flows::Flow;
use sifbm_core::gaussian::{sample_ensemble, GaussianField};
use sifbm_core::linalg::JitterPolicy;
use sifbm_core::measure::{characterize, Thresholds};
use sifbm_core::{HurstParam, Rect};

#[test]
fn standard_battery_in_each_dimension() {
    let h = HurstParam::new(0.35).unwrap();
    for (dim, target) in [(1, vec![1.5]), (2, vec![2.0, 1.0]), (3, vec![1.0, 2.0, 1.5])] {
        let b = standard_battery(&Rect::new(target).unwrap(), 10).unwrap();
        let simple = b.flows.iter().filter(|f| matches!(f, Flow::Simple(_))).count();
        assert_eq!(simple, usize::from(dim >= 2));
        assert_eq!(b.additivity.len(), if dim >= 2 { 2 } else { 1 });
        let idx = b.required_indices().unwrap();
        assert!(idx.iter().all(|r| r.dim() == Some(dim)));
        let field = GaussianField::new(&idx, h, &JitterPolicy::default()).unwrap();
        let e = sample_field(&field, 3000, 5).unwrap();
        let report = characterize(&e, &b, h, &Thresholds::default()).unwrap();
        assert!(report.verdict, "dim {dim}: {:?}", report.failed());
    }
}

#[test]
fn parallel_sampling_matches_sequential() {
    let idx: Vec<Rect> = [[0.5, 1.0], [1.0, 1.0], [2.0, 0.5]].iter().map(|c| Rect::new(c.to_vec()).unwrap()).collect();
    let field = GaussianField::new(&idx, HurstParam::new(0.2).unwrap(), &JitterPolicy::default()).unwrap();
    let seq = sample_ensemble(&field, 500, 3).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let par = pool.install(|| sample_field(&field, 500, 3).unwrap());
    assert_eq!(seq.values(), par.values());
}
