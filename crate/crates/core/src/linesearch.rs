//! Moré–Thuente line search for the strong Wolfe conditions.
//!
//! A direct transcription of the MINPACK-2 `dcsrch`/`dcstep` pair: the interval of
//! uncertainty is updated from cubic and quadratic interpolants, with the auxiliary
//! function `ψ(a) = φ(a) − φ(0) − c_descent·a·φ′(0)` used until a point with
//! `ψ ≤ 0, φ′ ≥ 0` has been found.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Sufficient-decrease constant.
    pub c_descent: f64,
    /// Curvature constant.
    pub c_curv: f64,
    pub step0: f64,
    pub max_iters: usize,
    pub step_min: f64,
    pub step_max: f64,
    /// Relative width of the interval of uncertainty below which the search gives up.
    pub xtol: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { c_descent: 1e-4, c_curv: 1e-2, step0: 1.0, max_iters: 20, step_min: 1e-20, step_max: 1e20, xtol: 1e-15 }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.c_descent && self.c_descent < self.c_curv && self.c_curv < 1.0) {
            return Err(format!("need 0 < c_descent < c_curv < 1, got {} and {}", self.c_descent, self.c_curv));
        }
        if !(self.step0 > 0.0) {
            return Err(format!("step0 must be positive, got {}", self.step0));
        }
        if self.max_iters < 1 {
            return Err("max_iters must be at least 1".into());
        }
        if !(0.0 <= self.step_min && self.step_min < self.step_max) {
            return Err(format!("bad step bounds [{}, {}]", self.step_min, self.step_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchStatus {
    /// Both strong Wolfe conditions hold at `step`.
    Converged,
    /// Evaluation budget exhausted; `step` is the lowest trial seen.
    MaxIters,
    /// `φ′(0) ≥ 0`; nothing was evaluated.
    DegenerateDirection,
    /// The bracket collapsed to rounding level or a step bound was reached;
    /// `step` is the lowest trial seen.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult<T> {
    pub step: T,
    pub f_at_step: T,
    pub g_dot_d_at_step: T,
    pub n_evals: usize,
    pub status: LineSearchStatus,
}

struct Bracket<T> {
    stx: T,
    fx: T,
    dx: T,
    sty: T,
    fy: T,
    dy: T,
}

/// Safeguarded trial-step computation (`dcstep`). Updates the bracket and returns the
/// next trial step.
fn step_update<T: Scalar>(b: &mut Bracket<T>, stp: T, fp: T, dp: T, brackt: &mut bool, stpmin: T, stpmax: T) -> T {
    let three = T::lit(3.0);
    let half = T::lit(0.5);
    let p66 = T::lit(0.66);
    let Bracket { stx, fx, dx, sty, fy, dy } = *b;
    let sgnd = dp * (dx / dx.abs());
    let max3 = |a: T, b: T, c: T| a.abs().max(b.abs()).max(c.abs());

    let stpf = if fp > fx {
        let theta = three * (fx - fp) / (stp - stx) + dx + dp;
        let s = max3(theta, dx, dp);
        let mut gamma = s * ((theta / s) * (theta / s) - (dx / s) * (dp / s)).max(T::zero()).sqrt();
        if stp < stx {
            gamma = -gamma;
        }
        let p = (gamma - dx) + theta;
        let q = ((gamma - dx) + gamma) + dp;
        let r = p / q;
        let stpc = stx + r * (stp - stx);
        let stpq = stx + ((dx / ((fx - fp) / (stp - stx) + dx)) / T::lit(2.0)) * (stp - stx);
        *brackt = true;
        if (stpc - stx).abs() < (stpq - stx).abs() {
            stpc
        } else {
            stpc + (stpq - stpc) * half
        }
    } else if sgnd < T::zero() {
        let theta = three * (fx - fp) / (stp - stx) + dx + dp;
        let s = max3(theta, dx, dp);
        let mut gamma = s * ((theta / s) * (theta / s) - (dx / s) * (dp / s)).max(T::zero()).sqrt();
        if stp > stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = ((gamma - dp) + gamma) + dx;
        let r = p / q;
        let stpc = stp + r * (stx - stp);
        let stpq = stp + (dp / (dp - dx)) * (stx - stp);
        *brackt = true;
        if (stpc - stp).abs() > (stpq - stp).abs() {
            stpc
        } else {
            stpq
        }
    } else if dp.abs() < dx.abs() {
        let theta = three * (fx - fp) / (stp - stx) + dx + dp;
        let s = max3(theta, dx, dp);
        let mut gamma = s * ((theta / s) * (theta / s) - (dx / s) * (dp / s)).max(T::zero()).sqrt();
        if stp > stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = (gamma + (dx - dp)) + gamma;
        let r = p / q;
        let stpc = if r < T::zero() && gamma != T::zero() {
            stp + r * (stx - stp)
        } else if stp > stx {
            stpmax
        } else {
            stpmin
        };
        let stpq = stp + (dp / (dp - dx)) * (stx - stp);
        if *brackt {
            let mut f = if (stpc - stp).abs() < (stpq - stp).abs() { stpc } else { stpq };
            let lim = stp + p66 * (sty - stp);
            f = if stp > stx { f.min(lim) } else { f.max(lim) };
            f
        } else {
            let f = if (stpc - stp).abs() > (stpq - stp).abs() { stpc } else { stpq };
            f.min(stpmax).max(stpmin)
        }
    } else if *brackt {
        let theta = three * (fp - fy) / (sty - stp) + dy + dp;
        let s = max3(theta, dy, dp);
        let mut gamma = s * ((theta / s) * (theta / s) - (dy / s) * (dp / s)).max(T::zero()).sqrt();
        if stp > sty {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = ((gamma - dp) + gamma) + dy;
        let r = p / q;
        stp + r * (sty - stp)
    } else if stp > stx {
        stpmax
    } else {
        stpmin
    };

    if fp > fx {
        b.sty = stp;
        b.fy = fp;
        b.dy = dp;
    } else {
        if sgnd < T::zero() {
            b.sty = stx;
            b.fy = fx;
            b.dy = dx;
        }
        b.stx = stp;
        b.fx = fp;
        b.dx = dp;
    }
    stpf
}

/// Searches along a one-dimensional restriction `phi(a) = (φ(a), φ′(a))` starting from
/// the known values `f0 = φ(0)` and `g0 = φ′(0)`. `phi` is called at most `max_iters` times.
pub fn more_thuente<T, F>(mut phi: F, f0: T, g0: T, cfg: &LineSearchConfig) -> LineSearchResult<T>
where
    T: Scalar,
    F: FnMut(T) -> (T, T),
{
    if !(g0 < T::zero()) {
        return LineSearchResult {
            step: T::zero(),
            f_at_step: f0,
            g_dot_d_at_step: g0,
            n_evals: 0,
            status: LineSearchStatus::DegenerateDirection,
        };
    }
    let ftol = T::lit(cfg.c_descent);
    let gtol = T::lit(cfg.c_curv);
    let xtol = T::lit(cfg.xtol);
    let stpmin = T::lit(cfg.step_min);
    let stpmax = T::lit(cfg.step_max);
    let xtrapl = T::lit(1.1);
    let xtrapu = T::lit(4.0);
    let half = T::lit(0.5);
    let p66 = T::lit(0.66);

    let gtest = ftol * g0;
    let mut width = stpmax - stpmin;
    let mut width1 = width + width;
    let mut brackt = false;
    let mut stage_one = true;
    let mut b = Bracket { stx: T::zero(), fx: f0, dx: g0, sty: T::zero(), fy: f0, dy: g0 };
    let mut stp = T::lit(cfg.step0).max(stpmin).min(stpmax);
    let mut stmin = T::zero();
    let mut stmax = stp + xtrapu * stp;

    let mut best: Option<(T, T, T)> = None;
    let mut n_evals = 0;
    let finish = |best: Option<(T, T, T)>, n_evals, status| {
        let (step, f, g) = best.unwrap_or((T::zero(), f0, g0));
        LineSearchResult { step, f_at_step: f, g_dot_d_at_step: g, n_evals, status }
    };

    while n_evals < cfg.max_iters {
        let (f, g) = phi(stp);
        n_evals += 1;

        if !f.is_finite() || !g.is_finite() {
            // Step overshot into a region where the model blows up: pull back toward stx.
            if !brackt {
                stmax = stp;
            }
            stp = b.stx + half * (stp - b.stx);
            if stp <= stpmin {
                return finish(best, n_evals, LineSearchStatus::Stalled);
            }
            continue;
        }
        if best.map_or(true, |(_, bf, _)| f < bf) {
            best = Some((stp, f, g));
        }

        let ftest = f0 + stp * gtest;
        if stage_one && f <= ftest && g >= T::zero() {
            stage_one = false;
        }
        if f <= ftest && g.abs() <= gtol * (-g0) {
            return LineSearchResult {
                step: stp,
                f_at_step: f,
                g_dot_d_at_step: g,
                n_evals,
                status: LineSearchStatus::Converged,
            };
        }
        let rounding = brackt && (stp <= stmin || stp >= stmax);
        let narrow = brackt && stmax - stmin <= xtol * stmax;
        let at_max = stp == stpmax && f <= ftest && g <= gtest;
        let at_min = stp == stpmin && (f > ftest || g >= gtest);
        if rounding || narrow || at_max || at_min {
            return finish(best, n_evals, LineSearchStatus::Stalled);
        }

        if stage_one && f <= b.fx && f > ftest {
            let mut m = Bracket {
                stx: b.stx,
                fx: b.fx - b.stx * gtest,
                dx: b.dx - gtest,
                sty: b.sty,
                fy: b.fy - b.sty * gtest,
                dy: b.dy - gtest,
            };
            stp = step_update(&mut m, stp, f - stp * gtest, g - gtest, &mut brackt, stmin, stmax);
            b = Bracket {
                stx: m.stx,
                fx: m.fx + m.stx * gtest,
                dx: m.dx + gtest,
                sty: m.sty,
                fy: m.fy + m.sty * gtest,
                dy: m.dy + gtest,
            };
        } else {
            stp = step_update(&mut b, stp, f, g, &mut brackt, stmin, stmax);
        }

        if brackt {
            if (b.sty - b.stx).abs() >= p66 * width1 {
                stp = b.stx + half * (b.sty - b.stx);
            }
            width1 = width;
            width = (b.sty - b.stx).abs();
            stmin = b.stx.min(b.sty);
            stmax = b.stx.max(b.sty);
        } else {
            stmin = stp + xtrapl * (stp - b.stx);
            stmax = stp + xtrapu * (stp - b.stx);
        }
        stp = stp.max(stpmin).min(stpmax);
        if brackt && (stp <= stmin || stp >= stmax || stmax - stmin <= xtol * stmax) {
            stp = b.stx;
        }
    }
    finish(best, n_evals, LineSearchStatus::MaxIters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wolfe_ok(r: &LineSearchResult<f64>, f0: f64, g0: f64, cfg: &LineSearchConfig) -> bool {
        r.f_at_step <= f0 + cfg.c_descent * r.step * g0 && r.g_dot_d_at_step.abs() <= cfg.c_curv * g0.abs()
    }

    #[test]
    fn shifted_quadratic_accepts_unit_step() {
        let cfg = LineSearchConfig::default();
        let phi = |a: f64| (0.5 * (a - 1.0) * (a - 1.0), a - 1.0);
        let r = more_thuente(phi, 0.5, -1.0, &cfg);
        assert_eq!(r.status, LineSearchStatus::Converged);
        assert_eq!(r.step, 1.0);
        assert_eq!(r.n_evals, 1);
    }

    #[test]
    fn quadratic_minus_linear_converges_to_one() {
        let cfg = LineSearchConfig::default();
        let phi = |a: f64| (0.5 * a * a - a, a - 1.0);
        let r = more_thuente(phi, 0.0, -1.0, &cfg);
        assert_eq!(r.status, LineSearchStatus::Converged);
        assert!(r.g_dot_d_at_step.abs() <= 1e-2);
        assert!(wolfe_ok(&r, 0.0, -1.0, &cfg));
    }

    #[test]
    fn ascent_direction_is_degenerate() {
        let cfg = LineSearchConfig::default();
        let mut calls = 0;
        let r = more_thuente(
            |a: f64| {
                calls += 1;
                (a, 1.0)
            },
            0.0,
            1.0,
            &cfg,
        );
        assert_eq!(r.status, LineSearchStatus::DegenerateDirection);
        assert_eq!(calls, 0);
        assert_eq!(r.n_evals, 0);
    }

    #[test]
    fn far_minimizer_is_reached_by_extrapolation() {
        let cfg = LineSearchConfig::default();
        // minimizer at a = 300
        let phi = |a: f64| (0.5 * (a - 300.0).powi(2), a - 300.0);
        let r = more_thuente(phi, 45000.0, -300.0, &cfg);
        assert_eq!(r.status, LineSearchStatus::Converged);
        assert!(wolfe_ok(&r, 45000.0, -300.0, &cfg));
        assert!(r.n_evals <= cfg.max_iters);
    }

    #[test]
    fn overshoot_is_bracketed_back() {
        let cfg = LineSearchConfig::default();
        // quartic with minimizer near 0.01
        let phi = |a: f64| {
            let x = a - 0.01;
            (x.powi(4) + 0.5 * x * x, 4.0 * x.powi(3) + x)
        };
        let (f0, g0) = phi(0.0);
        let r = more_thuente(phi, f0, g0, &cfg);
        assert_eq!(r.status, LineSearchStatus::Converged);
        assert!(wolfe_ok(&r, f0, g0, &cfg));
    }

    #[test]
    fn budget_exhaustion_returns_best_trial() {
        let cfg = LineSearchConfig { max_iters: 2, c_curv: 1e-9, c_descent: 1e-10, ..Default::default() };
        let phi = |a: f64| ((a - 0.3).powi(2) + (7.0 * a).sin() * 1e-3, 2.0 * (a - 0.3) + 7e-3 * (7.0 * a).cos());
        let (f0, g0) = phi(0.0);
        let mut seen = Vec::new();
        let r = more_thuente(
            |a| {
                let v = phi(a);
                seen.push(v.0);
                v
            },
            f0,
            g0,
            &cfg,
        );
        assert_eq!(r.n_evals, seen.len());
        assert!(r.n_evals <= cfg.max_iters);
        if r.status == LineSearchStatus::MaxIters {
            let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(r.f_at_step, min);
        }
    }

    #[test]
    fn non_finite_trials_are_pulled_back() {
        let cfg = LineSearchConfig { step0: 100.0, ..Default::default() };
        let phi = |a: f64| {
            if a > 2.0 {
                (f64::NAN, f64::NAN)
            } else {
                (0.5 * (a - 0.5).powi(2), a - 0.5)
            }
        };
        let r = more_thuente(phi, 0.125, -0.5, &cfg);
        assert_eq!(r.status, LineSearchStatus::Converged);
        assert!(r.step <= 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(LineSearchConfig::default().validate().is_ok());
        let bad = LineSearchConfig { c_descent: 0.5, c_curv: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LineSearchConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
