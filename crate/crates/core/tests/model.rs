use approx::assert_relative_eq;
use proptest::prelude::*;

use levitwin_core::constants::K_B;
use levitwin_core::model::{
    analytic_mode_temperature, lorentzian_psd, min_temperature, phonon_number, rms_from_temperature,
    t_env_for_min_temperature, temperature_from_force_psd, temperature_from_rms, thermal_force_psd, ModeLabel,
    ModeParams,
};

/// Adaptive Simpson quadrature, an independent oracle for PSD integrals.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn psd_variance(mode: &ModeParams, gamma_fb: f64) -> f64 {
    let psd = |f: f64| lorentzian_psd(mode, gamma_fb, f).unwrap();
    let width = (mode.gamma0() + gamma_fb) / std::f64::consts::TAU;
    let peak = psd(mode.f0);
    let tol = 1e-9 * peak * width;
    // Split at the resonance and at a few linewidths so the peak is resolved.
    let edges = [
        0.0,
        (mode.f0 - 50.0 * width).max(0.0),
        mode.f0,
        mode.f0 + 50.0 * width,
        20.0 * mode.f0,
    ];
    let body: f64 = edges.windows(2).map(|w| simpson(&psd, w[0], w[1], tol)).sum();
    // Tail beyond 20 f0 falls as f⁻⁴.
    let tail = psd(edges[4]) * edges[4] / 3.0;
    body + tail
}

#[test]
fn psd_integral_matches_equipartition() {
    let base = ModeParams::translational(ModeLabel::Y, 3.5e-7, 50.59, 200.0, 1.97);
    for ratio in [0.0, 1.0, 10.0, 100.0] {
        let gfb = ratio * base.gamma0();
        let variance = psd_variance(&base, gfb);
        let t = base.spring_constant().unwrap() * variance / K_B;
        let expected = analytic_mode_temperature(&base, gfb).unwrap();
        assert!((t / expected - 1.0).abs() < 5e-3, "ratio {ratio}: {t} vs {expected}");
    }
}

#[test]
fn rotational_psd_integral_uses_inertia() {
    let mode = ModeParams::rotational(ModeLabel::Beta, 3.5e-7, 4e-14, 80.0, 300.0, 1.0);
    let variance = psd_variance(&mode, 0.0);
    let expected = K_B * mode.t_env / mode.spring_constant().unwrap();
    assert!((variance / expected - 1.0).abs() < 5e-3);
}

#[test]
fn missing_inertia_is_an_error() {
    let mut mode = ModeParams::rotational(ModeLabel::Gamma, 3.5e-7, 4e-14, 30.0, 300.0, 1.0);
    mode.inertia = None;
    assert!(lorentzian_psd(&mode, 0.0, 30.0).is_err());
}

#[test]
fn back_derived_presets_reproduce_reported_limits() {
    let s = (1e-12f64).powi(2);
    for (mode, t_min) in [(ModeParams::mode3(), 0.65e-3), (ModeParams::mode4(), 1.9e-3)] {
        let t_env = t_env_for_min_temperature(&mode, t_min, s).unwrap();
        assert!((t_env / mode.t_env - 1.0).abs() < 5e-3, "{t_env}");
        let limits = min_temperature(&mode.with_t_env(t_env), s).unwrap();
        assert_relative_eq!(limits.t_min, t_min, max_relative = 1e-12);
    }
}

fn mode_strategy() -> impl Strategy<Value = ModeParams> {
    (1e-7..1e-5f64, 5.0..500.0f64, 10.0..1e7f64, 1e-3..300.0f64)
        .prop_map(|(m, f0, q, t)| ModeParams::translational(ModeLabel::Z, m, f0, q, t))
}

proptest! {
    #[test]
    fn psd_is_linear_in_temperature(mode in mode_strategy(), f in 0.1..1000.0f64, scale in 0.1..10.0f64) {
        let a = lorentzian_psd(&mode, 0.0, f).unwrap();
        let b = lorentzian_psd(&mode.clone().with_t_env(mode.t_env * scale), 0.0, f).unwrap();
        prop_assert!((b / a - scale).abs() <= 1e-12 * scale);
    }

    #[test]
    fn psd_is_symmetric_in_detuning_near_resonance(mode in mode_strategy(), d in 0.01..1.0f64) {
        // Close to resonance the response depends on |f − f0| only, to first order.
        let w = mode.gamma0() / std::f64::consts::TAU;
        let up = lorentzian_psd(&mode, 0.0, mode.f0 + d * w).unwrap();
        let down = lorentzian_psd(&mode, 0.0, mode.f0 - d * w).unwrap();
        prop_assert!((up / down - 1.0).abs() < 10.0 * w / mode.f0 + 1e-9);
    }

    #[test]
    fn feedback_never_heats(mode in mode_strategy(), g1 in 0.0..100.0f64, g2 in 0.0..100.0f64) {
        let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
        let t_lo = analytic_mode_temperature(&mode, lo * mode.gamma0()).unwrap();
        let t_hi = analytic_mode_temperature(&mode, hi * mode.gamma0()).unwrap();
        prop_assert!(t_hi <= t_lo * (1.0 + 1e-12));
    }

    #[test]
    fn rms_round_trip(mode in mode_strategy(), t in 1e-6..10.0f64) {
        let a = rms_from_temperature(t, &mode).unwrap();
        prop_assert!((temperature_from_rms(a, &mode).unwrap() / t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn force_psd_round_trip(mode in mode_strategy()) {
        let s_f = thermal_force_psd(&mode).unwrap();
        prop_assert!((temperature_from_force_psd(&mode, s_f).unwrap() / mode.t_env - 1.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_q_preserves_uncooled_temperature(mode in mode_strategy(), q in 10.0..1e4f64) {
        let s = mode.with_surrogate_q(q);
        prop_assert!((analytic_mode_temperature(&s, 0.0).unwrap() / mode.t_env - 1.0).abs() < 1e-12);
        let s_f = thermal_force_psd(&s).unwrap();
        prop_assert!((temperature_from_force_psd(&s, s_f).unwrap() / mode.t_env - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_temperature_scales_with_root_noise(mode in mode_strategy(), s in 1e-30..1e-20f64, k in 1.1..100.0f64) {
        let a = min_temperature(&mode, s).unwrap().t_min;
        let b = min_temperature(&mode, k * s).unwrap().t_min;
        prop_assert!((b / a - k.sqrt()).abs() < 1e-9 * k.sqrt());
    }

    #[test]
    fn phonon_number_is_monotone(t1 in 1e-9..10.0f64, t2 in 1e-9..10.0f64, f in 1.0..1e3f64) {
        let (n1, n2) = (phonon_number(t1, f).unwrap(), phonon_number(t2, f).unwrap());
        prop_assert_eq!(t1 < t2, n1 < n2);
    }
}
