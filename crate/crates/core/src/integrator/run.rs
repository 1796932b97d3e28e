//! The integration driver: regular zone, near-diagonal band, vertex passes.

use super::band::{band_rhs, chart, gap_floor, phi_value, q_value, BandPhi, Frame};
use super::stepper::{adaptive_step, locate, PiControl};
use super::{
    energy, energy_scale, plane_radius, taylor_start, CrossingRecord, Event, EventKind, IntegratorControls, Mode,
    Sample, Terminal, Trajectory, Zone,
};
use crate::math::{abs, pow, signed_pow, signum, sqrt};
use crate::model::{phi_eps, ModelParams, PlaneState};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// Integrates the Cauchy problem `(u, v)(0) = (0, x)`.
pub fn integrate(x: f64, params: &ModelParams, controls: &IntegratorControls) -> Result<Trajectory> {
    params.validate()?;
    controls.validate(params)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::precondition(format!("initial datum must be positive, got {x}")));
    }
    let mut run = Runner::new(x, params, controls);
    let terminal = run.go()?;
    Ok(Trajectory {
        x,
        samples: run.samples,
        events: run.events,
        crossings: run.crossings,
        terminal,
        params: *params,
        controls: *controls,
        min_radius: run.min_radius,
        vertex_radii: run.vertex_radii,
    })
}

struct BandState {
    r: f64,
    h: f64,
    w: f64,
    frame: Frame,
}

enum Next {
    Regular(PlaneState),
    Band(BandState),
    Done(Terminal),
}

struct Runner<'a> {
    x: f64,
    params: &'a ModelParams,
    field: ModelParams,
    ctl: &'a IntegratorControls,
    samples: Vec<Sample>,
    events: Vec<Event>,
    crossings: Vec<CrossingRecord>,
    vertex_radii: Vec<f64>,
    min_radius: f64,
    horizon: f64,
    negative_seen: bool,
    h_tol: f64,
    rho_tol: f64,
    steps: usize,
    tube_entry_h: f64,
    tube_entry_w: f64,
}

// Event slots in the regular zone.
const EV_V: usize = 0;
const EV_H: usize = 1;
const EV_BAND: usize = 2;
const EV_HOR: usize = 3;

// Event slots in the band.
const B_EXIT: usize = 0;
const B_VERTEX: usize = 1;
const B_H: usize = 2;
const B_HOR: usize = 3;
const B_TUBE: usize = 4;
const B_TURN: usize = 5;
const B_CROSS: usize = 6;

impl<'a> Runner<'a> {
    fn new(x: f64, params: &'a ModelParams, ctl: &'a IntegratorControls) -> Self {
        Runner {
            x,
            params,
            field: ctl.field_params(params),
            ctl,
            samples: Vec::new(),
            events: Vec::new(),
            crossings: Vec::new(),
            vertex_radii: Vec::new(),
            min_radius: x,
            horizon: ctl.r_max,
            negative_seen: false,
            h_tol: ctl.h_origin * energy_scale(x, params),
            rho_tol: ctl.tol_origin.unwrap_or(1e-8 * x),
            steps: 0,
            tube_entry_h: f64::NAN,
            tube_entry_w: f64::NAN,
        }
    }

    fn go(&mut self) -> Result<Terminal> {
        let pr = *self.params;
        let h0 = self.ctl.h_init.unwrap_or(1e-6 / pr.op()).min(0.5 * self.ctl.r_max);
        let a = taylor_start(self.x, 1.0, &pr).u;
        let w0 = signed_pow(self.x * self.x, pr.p);
        self.samples.push(Sample { r: 0.0, u: 0.0, v: self.x, h: energy(0.0, self.x, &pr), w: w0, du: a, dv: 0.0, zone: Zone::Regular });
        if energy(0.0, self.x, &pr) < 0.0 {
            self.negative_seen = true;
            if let Some(m) = self.ctl.negative_energy_margin {
                self.horizon = self.horizon.min(m);
            }
        }
        let mut next = Next::Regular(taylor_start(self.x, h0, &pr));
        loop {
            next = match next {
                Next::Regular(st) => self.regular(st)?,
                Next::Band(b) => self.band(b)?,
                Next::Done(t) => return Ok(t),
            };
        }
    }

    fn phi(&self, u: f64, v: f64) -> Result<f64> {
        match self.ctl.mode {
            Mode::Regularized { .. } => phi_eps(u, v, &self.field),
            _ => Ok(1.0),
        }
    }

    fn band_phi(&self, in_tube: bool) -> BandPhi {
        match self.ctl.mode {
            Mode::Regularized { .. } => BandPhi::Regularized(self.field),
            Mode::DiagonalSwitch if in_tube => BandPhi::Zero,
            _ => BandPhi::One,
        }
    }

    fn push_regular(&mut self, y: &[f64; 3]) -> Result<()> {
        let (r, u, v) = (y[0], y[1], y[2]);
        let (du, dv) = self.derivatives(r, u, v)?;
        let w = signed_pow((v - u) * (v + u), self.params.p);
        self.push_sample(Sample { r, u, v, h: energy(u, v, self.params), w, du, dv, zone: Zone::Regular });
        self.min_radius = self.min_radius.min(plane_radius(u, v));
        Ok(())
    }

    /// Appends a sample; a repeated radius replaces the previous one.
    fn push_sample(&mut self, smp: Sample) {
        match self.samples.last_mut() {
            Some(last) if last.r >= smp.r => *last = smp,
            _ => self.samples.push(smp),
        }
    }

    fn derivatives(&self, r: f64, u: f64, v: f64) -> Result<(f64, f64)> {
        let s = (v - u) * (v + u);
        let f = if s == 0.0 { f64::INFINITY } else { self.params.p * pow(abs(s), self.params.p - 1.0) };
        let phi = self.phi(u, v)?;
        Ok((v * (self.params.om() - f) - 2.0 * u * phi / r, -u * (f + self.params.op())))
    }

    fn event(&mut self, kind: EventKind, r: f64, u: f64, v: f64) {
        self.events.push(Event { kind, r, state: PlaneState::new(r, u, v) });
    }

    fn on_energy_zero(&mut self, r: f64, u: f64, v: f64) {
        self.event(EventKind::HZero, r, u, v);
        if !self.negative_seen {
            self.negative_seen = true;
            if let Some(m) = self.ctl.negative_energy_margin {
                self.horizon = self.horizon.min(r + m);
            }
        }
    }

    fn horizon_terminal(&mut self, r: f64, u: f64, v: f64, h: f64) -> Next {
        self.event(EventKind::MaxRadius, r, u, v);
        Next::Done(if h < 0.0 { Terminal::EnergyNegativeHorizon } else { Terminal::HorizonReached })
    }

    fn count_step(&mut self, r: f64) -> Result<()> {
        self.steps += 1;
        if self.steps > self.ctl.max_steps {
            return Err(Error::StepBudget(self.ctl.max_steps));
        }
        if !r.is_finite() {
            return Err(Error::NonFinite { r, what: "radius".into() });
        }
        Ok(())
    }

    /// Away from the diagonal, in the time `τ` with `dr/dτ = 1/(Ω+m+F)`.
    fn regular(&mut self, st: PlaneState) -> Result<Next> {
        let pr = *self.params;
        let field = self.field;
        let mode = self.ctl.mode;
        let kb = self.ctl.band_width;
        let mut f = |_t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
            let (r, u, v) = (y[0], y[1], y[2]);
            let s = (v - u) * (v + u);
            if s == 0.0 {
                return Err(Error::Singularity { r });
            }
            if !(r > 0.0) {
                return Err(Error::NonFinite { r, what: "radius left (0, inf)".into() });
            }
            let inv_f = pow(abs(s), 1.0 - pr.p) / pr.p;
            let denom = 1.0 + pr.op() * inv_f;
            let k = inv_f / denom;
            let fk = 1.0 / denom;
            let phi = match mode {
                Mode::Regularized { .. } => phi_eps(u, v, &field)?,
                _ => 1.0,
            };
            Ok([k, v * pr.om() * k - v * fk - 2.0 * u * phi * k / r, -u])
        };
        let (tr, ta) = (self.ctl.tol_rel, self.ctl.tol_abs);
        let norm = |a: &[f64; 3], b: &[f64; 3], e: &[f64; 3]| {
            let sr = ta + tr * abs(a[0]).max(abs(b[0]));
            let rho = plane_radius(a[1], a[2]).max(plane_radius(b[1], b[2]));
            let suv = ta + tr * rho;
            (abs(e[0]) / sr).max(abs(e[1]) / suv).max(abs(e[2]) / suv)
        };
        let band_g = move |y: &[f64; 3]| {
            let (u, v) = (y[1], y[2]);
            let a = abs(u) + abs(v);
            abs((v - u) * (v + u)) - kb * a * a
        };
        let mut pi = PiControl::default();
        let mut t = 0.0;
        let mut y = [st.r, st.u, st.v];
        let mut k = f(t, &y)?;
        let mut h = 1e-3;
        self.push_regular(&y)?;
        loop {
            self.count_step(y[0])?;
            let acc = adaptive_step(&mut f, &norm, &mut pi, t, &y, &k, h, f64::INFINITY, 1e-13 * (1.0 + abs(t)))?
                .ok_or(Error::StepUnderflow { r: y[0], u: y[1], v: y[2] })?;
            if acc.y.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { r: y[0], what: "regular-zone state".into() });
            }
            let vs = signum(y[2]);
            let h_start = energy(y[1], y[2], &pr);
            let horizon = self.horizon;
            let gs: [&dyn Fn(&[f64; 3]) -> f64; 4] = [
                &|z: &[f64; 3]| z[2] * vs,
                &|z: &[f64; 3]| energy(z[1], z[2], &pr),
                &band_g,
                &|z: &[f64; 3]| horizon - z[0],
            ];
            let armed = [vs != 0.0, h_start > 0.0, band_g(&y) > 0.0, horizon - y[0] > 0.0];
            let mut first: Option<(usize, f64, [f64; 3])> = None;
            for i in 0..4 {
                if armed[i] && gs[i](&acc.y) <= 0.0 {
                    let (th, ye) = locate(&mut f, &gs[i], t, &y, &k, acc.h_used, &acc.y)?;
                    if first.map_or(true, |(_, t0, _)| th < t0) {
                        first = Some((i, th, ye));
                    }
                }
            }
            let Some((which, th, ye)) = first else {
                t = acc.t;
                y = acc.y;
                k = acc.k;
                h = acc.h_next;
                self.push_regular(&y)?;
                if let Some(n) = self.origin_check(&y) {
                    return Ok(n);
                }
                continue;
            };
            t += th * acc.h_used;
            y = ye;
            k = f(t, &y)?;
            h = acc.h_next.min(acc.h_used).max(1e-6);
            self.push_regular(&y)?;
            let (r, u, v) = (y[0], y[1], y[2]);
            match which {
                EV_V => self.event(EventKind::VZero, r, u, v),
                EV_H => self.on_energy_zero(r, u, v),
                EV_BAND => {
                    if mode == Mode::Original {
                        return Err(Error::Singularity { r });
                    }
                    self.event(EventKind::DiagonalEnter, r, u, v);
                    let s = (v - u) * (v + u);
                    return Ok(Next::Band(BandState {
                        r,
                        h: energy(u, v, &pr),
                        w: signed_pow(s, pr.p),
                        frame: Frame::of(u, v),
                    }));
                }
                EV_HOR => return Ok(self.horizon_terminal(r, u, v, energy(u, v, &pr))),
                _ => unreachable!(),
            }
            if let Some(n) = self.origin_check(&y) {
                return Ok(n);
            }
        }
    }

    fn origin_check(&mut self, y: &[f64; 3]) -> Option<Next> {
        let (r, u, v) = (y[0], y[1], y[2]);
        if plane_radius(u, v) <= self.rho_tol && abs(energy(u, v, self.params)) <= self.h_tol {
            self.event(EventKind::OriginHit, r, u, v);
            return Some(Next::Done(Terminal::HitOrigin { r }));
        }
        None
    }

    fn push_band(&mut self, w: f64, y: &[f64; 2], frame: Frame, in_tube: bool) -> (f64, f64) {
        let c = chart(w, y[1], frame, self.params);
        let zone = if in_tube { Zone::Tube } else { Zone::Band };
        self.push_sample(Sample { r: y[0], u: c.u, v: c.v, h: y[1], w, du: f64::NAN, dv: f64::NAN, zone });
        self.min_radius = self.min_radius.min(plane_radius(c.u, c.v));
        (c.u, c.v)
    }

    /// Near the diagonal, in the variable `w = sgn(s)|s|^p`.
    fn band(&mut self, b: BandState) -> Result<Next> {
        let pr = *self.params;
        let w_tube = self.ctl.delta_diag;
        let switch = self.ctl.mode == Mode::DiagonalSwitch;
        let kexit = 1.25 * self.ctl.band_width;
        let mut frame = b.frame;
        let mut in_tube = switch && abs(b.w) < w_tube;
        if in_tube {
            self.tube_entry_h = b.h;
            self.tube_entry_w = b.w;
        }
        let mut t = b.w;
        let mut y = [b.r, b.h];
        let (tr, ta) = (self.ctl.tol_rel, self.ctl.tol_abs);
        let norm = |a: &[f64; 2], bb: &[f64; 2], e: &[f64; 2]| {
            let sr = ta + tr * abs(a[0]).max(abs(bb[0]));
            let sh = ta + tr * abs(a[1]).max(abs(bb[1]));
            (abs(e[0]) / sr).max(abs(e[1]) / sh)
        };
        'frame: loop {
            let phi_mode = self.band_phi(in_tube);
            let mut f = move |w: f64, z: &[f64; 2]| band_rhs(w, z, frame, phi_mode, &pr);
            let c0 = chart(t, y[1], frame, &pr);
            let q0 = q_value(&c0, y[0], phi_value(&c0, phi_mode)?, frame, &pr);
            let dir = signum(q0);
            if dir == 0.0 {
                return Err(Error::domain("band chart degenerates at entry"));
            }
            let mut k = f(t, &y)?;
            let mut pi = PiControl::default();
            let mut h = dir * 0.05 * abs(t).max(w_tube);
            self.push_band(t, &y, frame, in_tube);
            loop {
                self.count_step(y[0])?;
                let h_min = 1e-15 * abs(t).max(w_tube);
                let acc = match adaptive_step(&mut f, &norm, &mut pi, t, &y, &k, h, f64::INFINITY, h_min)? {
                    Some(a) => a,
                    None => {
                        let c = chart(t, y[1], frame, &pr);
                        return Err(Error::StepUnderflow { r: y[0], u: c.u, v: c.v });
                    }
                };
                let horizon = self.horizon;
                let ws = signum(t);
                let h_start = y[1];
                let g_exit = |w: f64, z: &[f64; 2]| kexit - abs(chart(w, z[1], frame, &pr).kappa);
                let g_vertex = |w: f64, z: &[f64; 2]| {
                    let c = chart(w, z[1], frame, &pr);
                    c.gap - gap_floor(w, z[1], c.s, &pr)
                };
                // Signed so that a step jumping over the tube still changes sign.
                let g_tube = |w: f64, _z: &[f64; 2]| if in_tube { w_tube - dir * w } else { -dir * w - w_tube };
                let g_turn = |w: f64, z: &[f64; 2]| {
                    let c = chart(w, z[1], frame, &pr);
                    let ph = phi_value(&c, phi_mode).unwrap_or(1.0);
                    dir * q_value(&c, z[0], ph, frame, &pr)
                };
                // Event functions take the state `[w, r, H]` via a shim.
                let gs: [&dyn Fn(f64, &[f64; 2]) -> f64; 7] = [
                    &g_exit,
                    &g_vertex,
                    &|_w: f64, z: &[f64; 2]| z[1],
                    &|_w: f64, z: &[f64; 2]| horizon - z[0],
                    &g_tube,
                    &g_turn,
                    &|w: f64, _z: &[f64; 2]| w * ws,
                ];
                let armed = [
                    g_exit(t, &y) > 0.0,
                    g_vertex(t, &y) > 0.0,
                    h_start > 0.0,
                    horizon - y[0] > 0.0,
                    switch && g_tube(t, &y) > 0.0,
                    g_turn(t, &y) > 0.0,
                    !switch && ws != 0.0,
                ];
                let (t0, h_used) = (t, acc.h_used);
                let mut first: Option<(usize, f64, [f64; 2])> = None;
                for i in 0..7 {
                    if armed[i] && gs[i](acc.t, &acc.y) <= 0.0 {
                        let gi = gs[i];
                        // `locate` sees only the state, so the independent
                        // variable is rebuilt from the step fraction.
                        let (th, ye) = locate_band(&mut f, gi, t0, &y, &k, h_used, &acc.y)?;
                        if first.map_or(true, |(_, b, _)| th < b) {
                            first = Some((i, th, ye));
                        }
                    }
                }
                let Some((which, th, ye)) = first else {
                    t = acc.t;
                    y = acc.y;
                    k = acc.k;
                    h = acc.h_next;
                    self.push_band(t, &y, frame, in_tube);
                    continue;
                };
                t = if th >= 1.0 { acc.t } else { t0 + th * h_used };
                y = ye;
                let (u, v) = self.push_band(t, &y, frame, in_tube);
                let r = y[0];
                match which {
                    B_EXIT | B_TURN => {
                        self.event(EventKind::DiagonalExit, r, u, v);
                        return Ok(Next::Regular(PlaneState::new(r, u, v)));
                    }
                    B_VERTEX => {
                        let c = chart(t, y[1], frame, &pr);
                        let vr = sqrt(abs(c.s));
                        self.vertex_radii.push(r);
                        self.min_radius = self.min_radius.min(vr);
                        if abs(y[1]) <= self.h_tol {
                            self.event(EventKind::OriginHit, r, 0.0, 0.0);
                            return Ok(Next::Done(Terminal::HitOrigin { r }));
                        }
                        if c.s < 0.0 {
                            // The turn is on the u axis: v changes sign.
                            self.event(EventKind::VZero, r, frame.sigma * frame.esign * vr, 0.0);
                            frame.esign = -frame.esign;
                        }
                        frame.sigma = -frame.sigma;
                        continue 'frame;
                    }
                    B_H => {
                        self.on_energy_zero(r, u, v);
                        k = f(t, &y)?;
                        h = h_used * 0.5;
                    }
                    B_HOR => return Ok(self.horizon_terminal(r, u, v, y[1])),
                    B_TUBE => {
                        if in_tube {
                            self.record_crossing(r, self.tube_entry_h, y[1], self.tube_entry_w, t);
                            in_tube = false;
                        } else {
                            self.tube_entry_h = y[1];
                            self.tube_entry_w = t;
                            in_tube = true;
                        }
                        if self.crossings.len() > self.ctl.max_crossings {
                            return Ok(Next::Done(Terminal::CrossingLimit));
                        }
                        continue 'frame;
                    }
                    B_CROSS => {
                        self.record_crossing(r, y[1], y[1], t0, acc.t);
                        if self.crossings.len() > self.ctl.max_crossings {
                            return Ok(Next::Done(Terminal::CrossingLimit));
                        }
                        k = f(t, &y)?;
                        h = h_used * 0.5;
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    fn record_crossing(&mut self, r: f64, h_entry: f64, h_exit: f64, w_before: f64, w_after: f64) {
        self.crossings.push(CrossingRecord { r, h_entry, h_exit, w_before, w_after });
    }
}

/// [`locate`] for the band, where event functions depend on `w` as well.
fn locate_band<F>(
    f: &mut F,
    g: &dyn Fn(f64, &[f64; 2]) -> f64,
    t: f64,
    y: &[f64; 2],
    k: &[f64; 2],
    h: f64,
    y_end: &[f64; 2],
) -> Result<(f64, [f64; 2])>
where
    F: FnMut(f64, &[f64; 2]) -> Result<[f64; 2]>,
{
    // Augment the state with the independent variable so `locate` can see it.
    let mut fa = |tt: f64, z: &[f64; 3]| -> Result<[f64; 3]> {
        let d = f(tt, &[z[1], z[2]])?;
        Ok([1.0, d[0], d[1]])
    };
    let ga = |z: &[f64; 3]| g(z[0], &[z[1], z[2]]);
    let za = [t, y[0], y[1]];
    let ka = [1.0, k[0], k[1]];
    let zend = [t + h, y_end[0], y_end[1]];
    let (th, z) = locate(&mut fa, &ga, t, &za, &ka, h, &zend)?;
    Ok((th, [z[1], z[2]]))
}
