use sifbm::format::{parse_label, read_ensemble_csv, read_sifb, write_ensemble_csv, write_sifb, MAGIC};
use sifbm_core::gaussian::{sample_ensemble, GaussianField, SampleEnsemble};
use sifbm_core::linalg::JitterPolicy;
use sifbm_core::{HurstParam, Rect};

fn r(c: &[f64]) -> Rect {
    Rect::new(c.to_vec()).unwrap()
}

fn ensemble() -> SampleEnsemble {
    let idx = vec![r(&[0.5, 1.0]), r(&[1.0 / 3.0, 2.0]), Rect::empty(), r(&[2.0, 2.0])];
    let field = GaussianField::new(&idx, HurstParam::new(0.35).unwrap(), &JitterPolicy::default()).unwrap();
    sample_ensemble(&field, 25, 9).unwrap()
}

#[test]
fn sifb_round_trip_is_exact() {
    let e = ensemble();
    let mut buf = Vec::new();
    write_sifb(&e, &mut buf).unwrap();
    assert_eq!(&buf[..4], MAGIC);
    // 44-byte header, one flag byte per index, corners, values
    assert_eq!(buf.len(), 44 + 4 + 3 * 16 + 8 * 25 * 4);
    let back = read_sifb(buf.as_slice()).unwrap();
    assert_eq!(back.indices(), e.indices());
    assert_eq!(back.values(), e.values());
    assert_eq!(back.hurst(), e.hurst());
    assert_eq!(back.seed(), Some(9));
}

#[test]
fn sifb_rejects_damage() {
    let e = ensemble();
    let mut buf = Vec::new();
    write_sifb(&e, &mut buf).unwrap();
    assert!(read_sifb(&buf[..buf.len() - 3]).is_err());
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_sifb(bad.as_slice()).is_err());
    let mut newer = buf;
    newer[4] = 2;
    assert!(read_sifb(newer.as_slice()).is_err());
}

#[test]
fn csv_round_trip_keeps_values() {
    let e = ensemble();
    let mut buf = Vec::new();
    write_ensemble_csv(&e, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("sample,0.5 1,0.3333333333333333 2,empty,2 2\n"));
    let back = read_ensemble_csv(buf.as_slice()).unwrap();
    assert_eq!(back.indices(), e.indices());
    assert_eq!(back.values(), e.values());
    assert_eq!(back.hurst(), None);
}

#[test]
fn labels() {
    assert_eq!(parse_label("empty").unwrap(), Rect::empty());
    assert_eq!(parse_label("1.5 2").unwrap(), r(&[1.5, 2.0]));
    assert!(parse_label("1.5,2").is_err());
    assert!(parse_label("-1 2").is_err());
}
