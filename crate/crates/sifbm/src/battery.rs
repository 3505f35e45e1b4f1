use std::f64::consts::FRAC_PI_2;

use sifbm_core::flows::{flows_through, uniform_grid, ElementaryFlow, Flow, SimpleFlow};
use sifbm_core::index::tiling;
use sifbm_core::measure::{AdditivityCase, Battery, CoverFamily, ExtensionCase};
use sifbm_core::{LeftNeighborhood, Rect, Result};

/// Flows, covers and decompositions inside `[0, target]`.
///
/// Flows: the diagonal, a power curve with exponents `1..=N`, a curved flow
/// (`sin` on the first axis, `t^{k+1}` on axis `k`), and for `N ≥ 2` a
/// two-piece simple flow whose second piece grows inside the first.
/// Extension cases tile `target` at halves (with `target` itself added) and
/// at quarters along the first axis. Additivity cases glue neighbouring
/// half-cells along the first and last axes.
pub fn standard_battery(target: &Rect, points: usize) -> Result<Battery> {
    let c = target.corner().unwrap_or(&[]).to_vec();
    let dim = c.len();
    let exponents: Vec<f64> = (1..=dim).map(|k| k as f64).collect();
    let cc = c.clone();
    let curved = ElementaryFlow::from_fn(uniform_grid(0.0, 1.0, points), move |t| {
        cc.iter()
            .enumerate()
            .map(|(k, &x)| if k == 0 { x * (FRAC_PI_2 * t).sin() } else { x * t.powi(k as i32 + 1) })
            .collect()
    })?;
    let mut flows: Vec<Flow> = vec![
        flows_through(target, points)?.into(),
        ElementaryFlow::power_curve(target, &exponents, points)?.into(),
        curved.into(),
    ];
    if dim >= 2 {
        let half = (points / 2).max(2);
        let c1 = c.clone();
        let first = ElementaryFlow::from_fn(uniform_grid(0.0, 1.0, half), move |t| {
            c1.iter().enumerate().map(|(k, &x)| if k == 0 { x * t } else { 0.5 * x * t }).collect()
        })?;
        let c2 = c.clone();
        let second = ElementaryFlow::from_fn(uniform_grid(1.0, 2.0, half), move |s| {
            c2.iter().enumerate().map(|(k, &x)| if k == 0 { 0.5 * x } else { 0.5 * x * s }).collect()
        })?;
        flows.push(SimpleFlow::new(vec![0.0, 1.0, 2.0], vec![first, second])?.into());
    }

    let halves: Vec<Vec<f64>> = c.iter().map(|&x| vec![0.5 * x]).collect();
    let mut quarters = halves.clone();
    if let Some(q) = quarters.first_mut() {
        *q = vec![0.25 * c[0], 0.5 * c[0], 0.75 * c[0]];
    }
    let mut coarse = tiling(target, &halves)?;
    coarse.push(LeftNeighborhood::from_rect(target.clone()));
    let extension = vec![
        ExtensionCase { target: target.clone(), covers: CoverFamily::new(coarse)? },
        ExtensionCase { target: target.clone(), covers: CoverFamily::new(tiling(target, &quarters)?)? },
    ];

    let zero = vec![0.0; dim];
    let mid: Vec<f64> = c.iter().map(|x| 0.5 * x).collect();
    let mut axes = vec![0];
    if dim >= 2 {
        axes.push(dim - 1);
    }
    let mut additivity = Vec::new();
    for d in axes {
        let mut lower = zero.clone();
        lower[d] = mid[d];
        let mut upper = mid.clone();
        upper[d] = c[d];
        additivity.push(AdditivityCase {
            first: LeftNeighborhood::cell(&zero, &mid)?,
            second: LeftNeighborhood::cell(&lower, &upper)?,
            union: LeftNeighborhood::cell(&zero, &upper)?,
        });
    }
    Ok(Battery { flows, extension, additivity, measure_indices: Vec::new() })
}
