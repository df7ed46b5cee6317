//! Transition amplitudes `f_{(i,j),(k,ℓ)}(T) = ⟨i,j| e^{−iTH} |k,ℓ⟩` and the
//! hypotenuse-transfer analysis.
//!
//! Two independent routes are provided for the source `(0,0)`: the spectral
//! sum over the tabulated transition matrix, and the closed form obtained
//! from the generating function.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::krawtchouk::{multinomial, KrawtchoukTable};
use crate::lattice::{Site, TriangularLattice};
use crate::rotation::RotationMatrix;
use crate::spectral::AnalyticSpectrum;

/// Products `R₁₁R₁₂` below this magnitude leave the transfer time undefined.
pub const MIN_RATE: f64 = 1e-12;

fn check_pair(table: &KrawtchoukTable, spectrum: &AnalyticSpectrum) -> Result<()> {
    let (a, b) = (table.lattice().dim(), spectrum.lattice().dim());
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `Σ_{s+t≤N} M_{i,j}(s,t) M_{k,ℓ}(s,t) e^{−iT x_{s,t}}`
pub fn amplitude_spectral(
    table: &KrawtchoukTable,
    spectrum: &AnalyticSpectrum,
    from: Site,
    to: Site,
    time: f64,
) -> Result<Complex64> {
    check_pair(table, spectrum)?;
    let lat = table.lattice();
    let a = lat.site_to_index(from)?;
    let b = lat.site_to_index(to)?;
    let m = table.transition();
    Ok(spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(row, x)| Complex64::from_polar(m[(row, a)] * m[(row, b)], -time * x))
        .sum())
}

/// `z₁ = e^{−iR₂₁R₂₂T}`, `z₂ = e^{iR₁₁R₁₂T}`.
pub fn phases(rot: &RotationMatrix, time: f64) -> (Complex64, Complex64) {
    (
        Complex64::from_polar(1.0, -rot.s_rate() * time),
        Complex64::from_polar(1.0, rot.t_rate() * time),
    )
}

/// `G_{i,j;N}(α) = binom(N;i,j)^{1/2} β₁^i β₂^j β₃^{N−i−j}` with
/// `β_p = Σ_ℓ R_{ℓp} α_ℓ`.
pub fn generating_function(
    rot: &RotationMatrix,
    n: usize,
    site: Site,
    alpha: [Complex64; 3],
) -> Result<Complex64> {
    TriangularLattice::new(n).check(site)?;
    let beta = |p: usize| -> Complex64 { (1..=3).map(|l| alpha[l - 1] * rot.r(l, p)).sum() };
    let u = n - site.i - site.j;
    let root = multinomial(n, site.i, site.j)?.sqrt();
    Ok(beta(1).powu(site.i as u32) * beta(2).powu(site.j as u32) * beta(3).powu(u as u32) * root)
}

/// `f_{(0,0),(i,j)}(T)` from the generating function at
/// `α = (R₁₃z₁, R₂₃z₂, R₃₃)`.
pub fn amplitude_closed_form(rot: &RotationMatrix, n: usize, to: Site, time: f64) -> Result<Complex64> {
    let (z1, z2) = phases(rot, time);
    let alpha = [z1 * rot.r(1, 3), z2 * rot.r(2, 3), Complex64::new(rot.r(3, 3), 0.0)];
    generating_function(rot, n, to, alpha)
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeSeries {
    pub from: Site,
    pub to: Site,
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub fidelities: Vec<f64>,
}

/// `steps` uniform times over `[t_min, t_max]`, both ends included exactly.
pub fn sample_times(t_min: f64, t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::BadRange(format!("need at least 2 steps, got {steps}")));
    }
    if !(t_min.is_finite() && t_max.is_finite()) {
        return Err(Error::NonFinite("time range"));
    }
    if t_min >= t_max {
        return Err(Error::BadRange(format!("t_min {t_min} must be below t_max {t_max}")));
    }
    let dt = (t_max - t_min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k + 1 == steps { t_max } else { t_min + dt * k as f64 })
        .collect())
}

impl AmplitudeSeries {
    /// Evaluates `amplitude` at every sample time.
    pub fn sample<F>(from: Site, to: Site, times: Vec<f64>, amplitude: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Complex64>,
    {
        let amplitudes = times.iter().map(|&t| amplitude(t)).collect::<Result<Vec<_>>>()?;
        let fidelities = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        Ok(Self {
            from,
            to,
            times,
            amplitudes,
            fidelities,
        })
    }
}

/// Spectral-sum amplitudes on a uniform grid of `steps` times.
pub fn fidelity_series(
    table: &KrawtchoukTable,
    spectrum: &AnalyticSpectrum,
    from: Site,
    to: Site,
    t_min: f64,
    t_max: f64,
    steps: usize,
) -> Result<AmplitudeSeries> {
    let times = sample_times(t_min, t_max, steps)?;
    table.lattice().check(from)?;
    table.lattice().check(to)?;
    AmplitudeSeries::sample(from, to, times, |t| amplitude_spectral(table, spectrum, from, to, t))
}

#[derive(Debug, Clone, Serialize)]
pub struct HypotenuseSite {
    pub site: Site,
    /// `binom(N;i,j)^{1/2} (√2 R₃₁)^i (√2 R₃₂)^j`
    pub predicted_amplitude: f64,
    pub predicted_probability: f64,
    /// `|f_{(0,0),(i,j)}(T*)|²` from the evaluated dynamics.
    pub observed_probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PstReport {
    pub order: usize,
    pub tol: f64,
    /// `|R₂₁R₂₂ − R₁₁R₁₂|`
    pub condition_a_defect: f64,
    /// `|R₃₃ − √2/2|`
    pub condition_b_defect: f64,
    pub status: &'static str,
    /// `π / (R₁₁R₁₂)`, possibly negative.
    pub transfer_time: Option<f64>,
    /// Spectral period `2π / |R₁₁R₁₂|`, defined when the spectrum is
    /// commensurate (condition A).
    pub period: Option<f64>,
    /// `transfer_time` reduced into `[0, period)`.
    pub positive_transfer_time: Option<f64>,
    pub hypotenuse: Vec<HypotenuseSite>,
    /// `max_{i+j<N} |f_{(0,0),(i,j)}(T*)|`
    pub leakage: Option<f64>,
    /// Which route evaluated the amplitudes: `spectral` or `closed_form`.
    pub amplitude_path: Option<&'static str>,
}

/// Checks `R₂₁R₂₂ = R₁₁R₁₂` (condition A) and `R₃₃ = √2/2` (condition B)
/// within `tol`. When both hold, the excitation at `(0,0)` is moved entirely
/// onto the hypotenuse `i+j = N` at `T* = π/(R₁₁R₁₂)`, with amplitudes
/// `binom(N;i,j)^{1/2} (√2 R₃₁)^i (√2 R₃₂)^j`; the report compares that
/// prediction with the evaluated dynamics.
pub fn pst_check(rot: &RotationMatrix, n: usize, tol: f64) -> Result<PstReport> {
    let rate = rot.t_rate();
    let condition_a_defect = (rot.s_rate() - rate).abs();
    let condition_b_defect = (rot.r(3, 3) - SQRT_2 / 2.0).abs();
    let mut report = PstReport {
        order: n,
        tol,
        condition_a_defect,
        condition_b_defect,
        status: "not_pst_family",
        transfer_time: None,
        period: None,
        positive_transfer_time: None,
        hypotenuse: Vec::new(),
        leakage: None,
        amplitude_path: None,
    };
    let family = condition_a_defect <= tol && condition_b_defect <= tol;
    if condition_a_defect <= tol && rate.abs() >= MIN_RATE {
        let time = PI / rate;
        let period = 2.0 * PI / rate.abs();
        report.transfer_time = Some(time);
        report.period = Some(period);
        report.positive_transfer_time = Some(time.rem_euclid(period));
    }
    if !family {
        return Ok(report);
    }
    let Some(time) = report.transfer_time else {
        return Err(Error::DegenerateRotation {
            entry: "R11*R12",
            value: rate.abs(),
            threshold: MIN_RATE,
        });
    };
    report.status = "pst_family";

    // Prefer the spectral route so the prediction is checked against an
    // independent evaluation; fall back to the closed form when the
    // polynomial table cannot be built.
    let lattice = TriangularLattice::new(n);
    let amplitudes: Vec<Complex64> = match KrawtchoukTable::build(rot, n) {
        Ok(table) => {
            report.amplitude_path = Some("spectral");
            let spectrum = AnalyticSpectrum::new(rot, n);
            lattice
                .sites()
                .map(|to| amplitude_spectral(&table, &spectrum, Site::ORIGIN, to, time))
                .collect::<Result<_>>()?
        }
        Err(Error::DegenerateRotation { .. }) => {
            report.amplitude_path = Some("closed_form");
            lattice
                .sites()
                .map(|to| amplitude_closed_form(rot, n, to, time))
                .collect::<Result<_>>()?
        }
        Err(e) => return Err(e),
    };

    let mut leakage = 0.0f64;
    for (site, amp) in lattice.sites().zip(&amplitudes) {
        if site.i + site.j < n {
            leakage = leakage.max(amp.norm());
        }
    }
    report.leakage = Some(leakage);

    for site in lattice.hypotenuse() {
        let predicted = multinomial(n, site.i, site.j)?.sqrt()
            * (SQRT_2 * rot.r(3, 1)).powi(site.i as i32)
            * (SQRT_2 * rot.r(3, 2)).powi(site.j as i32);
        let observed = amplitudes[lattice.site_to_index(site)?].norm_sqr();
        report.hypotenuse.push(HypotenuseSite {
            site,
            predicted_amplitude: predicted,
            predicted_probability: predicted * predicted,
            observed_probability: observed,
        });
    }
    Ok(report)
}
