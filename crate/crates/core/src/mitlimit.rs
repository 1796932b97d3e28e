//! Free Dirac arcs and the `p → 0` continuation of nodal solutions.

use crate::bessel::{j0, j1, y0, y1};
use crate::constants::{omega_threshold, p_bar};
use crate::integrator::{IntegratorControls, Trajectory, Zone};
use crate::math::{abs, atan2, cos, hypot, sin, sqrt};
use crate::model::ModelParams;
use crate::shooter::{ShotResult, Shooter};
use crate::{Error, Result};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// `v = A(cos δ·j₀(κr) + sin δ·y₀(κr))`, `u = Aκ/(Ω+m)·(cos δ·j₁(κr) + sin δ·y₁(κr))`.
/// `offset = δ = 0` is the branch regular at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FreeDiracArc {
    pub amplitude: f64,
    pub kappa: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub offset: f64,
}

impl FreeDiracArc {
    pub fn regular(amplitude: f64, params: &ModelParams, r_lo: f64, r_hi: f64) -> Self {
        FreeDiracArc { amplitude, kappa: free_wavenumber(params), r_lo, r_hi, offset: 0.0 }
    }
}

/// `κ = √(Ω² − m²)`.
pub fn free_wavenumber(params: &ModelParams) -> f64 {
    sqrt(params.omega * params.omega - params.mass * params.mass)
}

/// The free solution on an arc.
pub fn free_dirac(r: f64, arc: &FreeDiracArc, params: &ModelParams) -> Result<(f64, f64)> {
    let (c, s) = (cos(arc.offset), sin(arc.offset));
    if r <= 0.0 {
        if s == 0.0 {
            return Ok((0.0, arc.amplitude * c));
        }
        return Err(Error::domain("the singular branch is not defined at r <= 0"));
    }
    let x = arc.kappa * r;
    let (ja, jb) = (j0(x), j1(x));
    let (ya, yb) = if s == 0.0 { (0.0, 0.0) } else { (y0(x), y1(x)) };
    let v = arc.amplitude * (c * ja + s * ya);
    let u = arc.amplitude * arc.kappa / params.op() * (c * jb + s * yb);
    Ok((u, v))
}

/// Fitted free arcs of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MitFit {
    pub arcs: Vec<FreeDiracArc>,
    pub sup_distance: f64,
    /// `||u| − |v||/A` of the first fitted arc at the end of its run.
    pub boundary_discrepancy: Option<f64>,
    pub notices: Vec<String>,
}

/// Maximal runs of Regular samples, as index ranges, up to the support end.
fn regular_runs(tr: &Trajectory, r_stop: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, s) in tr.samples.iter().enumerate() {
        let ok = s.zone == Zone::Regular && s.r <= r_stop;
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                runs.push((a, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push((a, tr.samples.len()));
    }
    runs
}

/// End of the compact support: the hit radius, else the first negative energy.
pub fn support_end(tr: &Trajectory) -> f64 {
    tr.hit_radius().or(tr.first_negative_energy()).unwrap_or(tr.r_end())
}

/// Least-squares free Dirac fit on the inner 80% of each arc where
/// `|v² − u²|` exceeds 10% of its maximum on the arc.
pub fn mit_fit(tr: &Trajectory, params: &ModelParams) -> Result<MitFit> {
    let kappa = free_wavenumber(params);
    let ku = kappa / params.op();
    let mut arcs = Vec::new();
    let mut notices = Vec::new();
    let mut sup = 0.0f64;
    let mut boundary = None;
    let stop = support_end(tr);
    for (a, b) in regular_runs(tr, stop) {
        let run = &tr.samples[a..b];
        let smax = run.iter().map(|s| abs(s.state().s())).fold(0.0, f64::max);
        let above: Vec<usize> = (0..run.len()).filter(|&i| abs(run[i].state().s()) >= 0.1 * smax).collect();
        let (Some(&i0), Some(&i1)) = (above.first(), above.last()) else { continue };
        let (r0, r1) = (run[i0].r, run[i1].r);
        let (lo, hi) = (r0 + 0.1 * (r1 - r0), r1 - 0.1 * (r1 - r0));
        let pts: Vec<_> = run.iter().filter(|s| s.r >= lo && s.r <= hi && s.r > 0.0).collect();
        if pts.len() < 20 {
            notices.push(format!("arc [{r0}, {r1}] has {} samples; skipped", pts.len()));
            continue;
        }
        let regular_only = run[0].r == 0.0;
        // Normal equations for v ≈ a·j₀ + b·y₀ and u ≈ κ_u(a·j₁ + b·y₁).
        let (mut saa, mut sab, mut sbb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for s in &pts {
            let x = kappa * s.r;
            let (pa, qa) = (j0(x), ku * j1(x));
            let (pb, qb) = if regular_only { (0.0, 0.0) } else { (y0(x), ku * y1(x)) };
            saa += pa * pa + qa * qa;
            sab += pa * pb + qa * qb;
            sbb += pb * pb + qb * qb;
            sa += pa * s.v + qa * s.u;
            sb += pb * s.v + qb * s.u;
        }
        let (ca, cb) = if regular_only {
            (sa / saa, 0.0)
        } else {
            let det = saa * sbb - sab * sab;
            if det == 0.0 {
                notices.push(format!("arc [{r0}, {r1}] is degenerate; skipped"));
                continue;
            }
            ((sa * sbb - sb * sab) / det, (saa * sb - sab * sa) / det)
        };
        let mut arc = FreeDiracArc { amplitude: hypot(ca, cb), kappa, r_lo: lo, r_hi: hi, offset: atan2(cb, ca) };
        if arc.amplitude == 0.0 {
            arc.offset = 0.0;
        }
        for s in &pts {
            let (u, v) = free_dirac(s.r, &arc, params)?;
            sup = sup.max(abs(u - s.u)).max(abs(v - s.v));
        }
        if boundary.is_none() && arc.amplitude > 0.0 {
            let r_end = run[run.len() - 1].r;
            let (u, v) = free_dirac(r_end, &arc, params)?;
            boundary = Some(abs(abs(u) - abs(v)) / arc.amplitude);
        }
        arcs.push(arc);
    }
    Ok(MitFit { arcs, sup_distance: sup, boundary_discrepancy: boundary, notices })
}

/// Snapshot of the `k`-node solution at one exponent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuationRecord {
    pub p: f64,
    pub k: usize,
    pub x_k: f64,
    pub winding: usize,
    pub support_radius: f64,
    pub support_bound: f64,
    pub node_radii: Vec<f64>,
    /// Radii where the path meets the diagonal (crossings, vertices, the hit),
    /// clustered to a relative width of 1e−6.
    pub interface_radii: Vec<f64>,
    /// Radii where the slope of `(u, v)` spikes above ten times its median.
    pub jump_radii: Vec<f64>,
    /// Signs of `v² − u²` on the successive Regular runs inside the support.
    pub sign_pattern: Vec<i8>,
    /// `|v² − u²|` on the approach to each interface, relative to the largest
    /// `|v² − u²|` on the support.
    pub interface_gap: Vec<f64>,
    pub sup_distance: f64,
    pub fit: Vec<FreeDiracArc>,
    pub boundary_discrepancy: Option<f64>,
    pub failed: Option<String>,
}

impl ContinuationRecord {
    fn failed(p: f64, k: usize, why: String) -> Self {
        ContinuationRecord {
            p,
            k,
            x_k: f64::NAN,
            winding: 0,
            support_radius: f64::NAN,
            support_bound: f64::NAN,
            node_radii: Vec::new(),
            interface_radii: Vec::new(),
            jump_radii: Vec::new(),
            sign_pattern: Vec::new(),
            interface_gap: Vec::new(),
            sup_distance: f64::NAN,
            fit: Vec::new(),
            boundary_discrepancy: None,
            failed: Some(why),
        }
    }

    /// Builds the record of a successful nodal search.
    pub fn from_shot(shot: &ShotResult, params: &ModelParams) -> Result<Self> {
        let tr = &shot.trajectory;
        let stop = support_end(tr);
        let mut raw: Vec<f64> = tr.crossings.iter().map(|c| c.r).chain(tr.vertex_radii.iter().copied()).collect();
        if let Some(r) = tr.hit_radius() {
            raw.push(r);
        }
        let interfaces = cluster(raw.into_iter().filter(|&r| r <= stop * (1.0 + 1e-9)).collect(), 1e-6);
        let smax = tr.samples.iter().filter(|s| s.r <= stop).map(|s| abs(s.state().s())).fold(0.0, f64::max);
        let mut gaps = Vec::new();
        for &ri in &interfaces {
            // The sampled |v² − u²| at the interface itself (band samples land on it).
            let i = tr.samples.partition_point(|s| s.r < ri * (1.0 - 1e-12)).min(tr.samples.len() - 1);
            let at = tr.samples[i..].iter().take_while(|s| s.r <= ri * (1.0 + 1e-12)).map(|s| abs(s.state().s()));
            let g = at.fold(f64::INFINITY, f64::min);
            gaps.push(if smax > 0.0 && g.is_finite() { g / smax } else { 0.0 });
        }
        let sign_pattern = regular_runs(tr, stop)
            .into_iter()
            .filter_map(|(a, b)| {
                let s = tr.samples[a..b].iter().map(|s| s.state().s()).fold(0.0, |acc, x| if abs(x) > abs(acc) { x } else { acc });
                (s != 0.0).then_some(if s > 0.0 { 1 } else { -1 })
            })
            .collect();
        let fit = mit_fit(tr, params)?;
        Ok(ContinuationRecord {
            p: params.p,
            k: shot.k,
            x_k: shot.x_k,
            winding: tr.winding(),
            support_radius: shot.support_radius,
            support_bound: shot.support_bound,
            node_radii: shot.node_radii.clone(),
            interface_radii: interfaces,
            jump_radii: jump_radii(tr, stop),
            sign_pattern,
            interface_gap: gaps,
            sup_distance: fit.sup_distance,
            fit: fit.arcs,
            boundary_discrepancy: fit.boundary_discrepancy,
            failed: None,
        })
    }
}

fn cluster(mut v: Vec<f64>, rel: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for r in v {
        match out.last() {
            Some(&l) if r - l <= rel * r.max(l) => {}
            _ => out.push(r),
        }
    }
    out
}

fn jump_radii(tr: &Trajectory, stop: f64) -> Vec<f64> {
    let slopes: Vec<(f64, f64)> = tr
        .samples
        .windows(2)
        .filter(|w| w[1].r <= stop && w[1].r > w[0].r)
        .map(|w| {
            let dr = w[1].r - w[0].r;
            (0.5 * (w[0].r + w[1].r), abs(w[1].u - w[0].u).max(abs(w[1].v - w[0].v)) / dr)
        })
        .collect();
    if slopes.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = slopes.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    // One radius per contiguous run of spiking segments.
    let mut out = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    for &(r, slope) in &slopes {
        match (slope > 10.0 * median, run) {
            (true, None) => run = Some((r, r)),
            (true, Some((a, _))) => run = Some((a, r)),
            (false, Some((a, b))) => {
                out.push(0.5 * (a + b));
                run = None;
            }
            _ => {}
        }
    }
    if let Some((a, b)) = run {
        out.push(0.5 * (a + b));
    }
    out
}

/// A continuation step: the record and, when the search succeeded, the shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationStep {
    pub record: ContinuationRecord,
    pub shot: Option<ShotResult>,
}

/// Tracks the `k`-node solution along a strictly decreasing list of exponents.
/// Each search starts its scan from the previous `x_k`.
pub fn continuation(
    k: usize,
    p_list: &[f64],
    base: &ModelParams,
    controls: &IntegratorControls,
    x_tol_rel: f64,
) -> Result<Vec<ContinuationStep>> {
    if p_list.is_empty() {
        return Err(Error::precondition("empty exponent list"));
    }
    let pb = p_bar();
    for w in p_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::precondition("exponents must be strictly decreasing"));
        }
    }
    if !(p_list[0] < pb) {
        return Err(Error::precondition(format!("exponents must lie below p_bar = {pb}")));
    }
    let threshold = omega_threshold(0.5 * pb, base.mass)?;
    if !(base.omega > threshold) {
        return Err(Error::precondition(format!(
            "omega = {} must exceed the threshold {threshold} at p_bar/2",
            base.omega
        )));
    }
    let mut out = Vec::with_capacity(p_list.len());
    let mut guess: Option<f64> = None;
    for &p in p_list {
        let params = ModelParams { p, ..*base };
        let step = Shooter::new(&params, controls).and_then(|sh| match guess {
            Some(g) => sh.find_nodal_from(k, g, x_tol_rel).or_else(|_| sh.find_nodal(k, x_tol_rel)),
            None => sh.find_nodal(k, x_tol_rel),
        });
        match step.and_then(|shot| Ok((ContinuationRecord::from_shot(&shot, &params)?, shot))) {
            Ok((record, shot)) => {
                guess = Some(shot.x_k);
                out.push(ContinuationStep { record, shot: Some(shot) });
            }
            Err(e) => out.push(ContinuationStep { record: ContinuationRecord::failed(p, k, e.to_string()), shot: None }),
        }
    }
    Ok(out)
}

/// Cross-record checks of the nodal pattern.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructureReport {
    pub k: usize,
    /// Positive runs of `v² − u²` per record.
    pub positive_intervals: Vec<usize>,
    pub interface_counts: Vec<usize>,
    pub pattern_ok: bool,
    pub interface_bound_ok: bool,
    /// Largest relative change of each interface radius between successive records.
    pub interface_drift: Vec<f64>,
    /// `(r, |Δu|, |Δv|)` across each interface of the last record.
    pub jumps: Vec<(f64, f64, f64)>,
}

pub fn nodal_structure(records: &[ContinuationRecord], last: Option<&Trajectory>) -> Result<StructureReport> {
    let ok: Vec<&ContinuationRecord> = records.iter().filter(|r| r.failed.is_none()).collect();
    if ok.len() < 2 {
        return Err(Error::precondition("need at least two successful records"));
    }
    let k = ok[0].k;
    if let Some(bad) = ok.iter().find(|r| r.winding != k) {
        return Err(Error::Structure(format!("record at p = {} has {} nodes, expected {k}", bad.p, bad.winding)));
    }
    let positive: Vec<usize> = ok.iter().map(|r| r.sign_pattern.iter().filter(|&&s| s > 0).count()).collect();
    let counts: Vec<usize> = ok.iter().map(|r| r.interface_radii.len()).collect();
    let pattern_ok = ok.iter().all(|r| r.sign_pattern.first() == Some(&1)) && positive.iter().all(|&n| n == k + 1);
    let interface_bound_ok = counts.iter().all(|&l| l <= 2 * k + 1);
    let n_if = counts.iter().copied().min().unwrap_or(0);
    let mut drift = alloc::vec![0.0f64; n_if];
    for w in ok.windows(2) {
        for (i, d) in drift.iter_mut().enumerate() {
            let (a, b) = (w[0].interface_radii[i], w[1].interface_radii[i]);
            *d = d.max(abs(b - a) / a);
        }
    }
    let mut jumps = Vec::new();
    if let Some(tr) = last {
        for &ri in &ok[ok.len() - 1].interface_radii {
            let before = tr.samples.iter().filter(|s| s.zone == Zone::Regular && s.r < ri).last();
            let after = tr.samples.iter().find(|s| s.zone == Zone::Regular && s.r > ri);
            let (ub, vb) = before.map_or((0.0, 0.0), |s| (s.u, s.v));
            let (ua, va) = after.map_or((0.0, 0.0), |s| (s.u, s.v));
            jumps.push((ri, abs(ua - ub), abs(va - vb)));
        }
    }
    Ok(StructureReport {
        k,
        positive_intervals: positive,
        interface_counts: counts,
        pattern_ok,
        interface_bound_ok,
        interface_drift: drift,
        jumps,
    })
}
