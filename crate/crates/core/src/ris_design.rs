//! MMSE design of the RIS reflection coefficients with passive (unit
//! modulus) or active (power budget) truncation.

use crate::channel::{cascade_matrices, effective_channel, CascadeSet, ChannelSet};
use crate::config::{PowerBudget, RisMode};
use crate::detector::{filter_bank, gaussian_params_mmse, noise_covariance};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_solve, min_norm_solve, vec_norm_sqr, CMat, CVec};

/// Relative singular-value cutoff of the rank-deficient fallback solve.
const PINV_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionState {
    pub phi: CVec,
    pub mode: RisMode,
}

impl ReflectionState {
    pub fn elements(&self) -> usize {
        self.phi.len()
    }
}

/// Unconstrained minimizer of the reflection design quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSolution {
    pub phi: CVec,
    /// Condition estimate of the normal matrix (infinite when singular).
    pub condition: f64,
    /// True when the normal matrix was singular and the minimum-norm
    /// minimizer was returned.
    pub rank_deficient: bool,
}

fn normal_equations(
    w: &CMat,
    cascades: &CascadeSet,
    base: &CMat,
    g: &CMat,
    sigma_v2: f64,
    sigma_x2: f64,
) -> Result<(CMat, CMat)> {
    let users = cascades.a.len();
    let n = g.ncols();
    if w.nrows() != users || base.ncols() != users || w.ncols() != g.nrows() {
        return Err(Error::Dimension(format!(
            "W {:?}, base {:?}, G {:?}, {} cascades",
            w.shape(),
            base.shape(),
            g.shape(),
            users
        )));
    }
    let mut normal = CMat::zeros(n, n);
    let mut rhs = CMat::zeros(n, 1);
    let w_base = w * base;
    for (i, a_i) in cascades.a.iter().enumerate() {
        let wa = w * a_i;
        let wa_h = wa.adjoint();
        normal += &wa_h * &wa;
        let mut resid = -w_base.column(i);
        resid[i] += c(1.0, 0.0);
        rhs += &wa_h * resid;
    }
    if sigma_v2 > 0.0 {
        let wg = w * g;
        normal += wg.adjoint() * &wg * c(sigma_v2 / sigma_x2, 0.0);
    }
    Ok((normal, rhs))
}

/// Solves `[beta + (sigma_v2/sigma_x2)(WG)^H(WG)] phi = Psi` with
/// `beta = sum_i (W A_i)^H (W A_i)` and `Psi = sum_i (W A_i)^H (e_i - W b_i)`,
/// `b_i` the i-th column of `base`.
///
/// A singular normal matrix (N larger than the rank of `beta`, which is
/// routine for passive surfaces) yields the minimum-norm minimizer.
pub fn solve_reflection(
    w: &CMat,
    cascades: &CascadeSet,
    base: &CMat,
    g: &CMat,
    sigma_v2: f64,
    sigma_x2: f64,
) -> Result<ReflectionSolution> {
    let (normal, rhs) = normal_equations(w, cascades, base, g, sigma_v2, sigma_x2)?;
    match hermitian_solve(&normal, &rhs, "reflection design") {
        Ok((x, condition)) => Ok(ReflectionSolution {
            phi: x.column(0).into_owned(),
            condition,
            rank_deficient: false,
        }),
        Err(Error::Conditioning { .. }) => {
            let x = min_norm_solve(&normal, &rhs, PINV_REL_TOL)?;
            if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Conditioning {
                    what: "reflection design",
                    condition: f64::INFINITY,
                });
            }
            Ok(ReflectionSolution {
                phi: x.column(0).into_owned(),
                condition: f64::INFINITY,
                rank_deficient: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// `sum_i ‖e_i - W b_i - W A_i phi‖² + (sigma_v2/sigma_x2) ‖W G phi‖²`.
pub fn design_objective(
    w: &CMat,
    cascades: &CascadeSet,
    base: &CMat,
    g: &CMat,
    phi: &CVec,
    sigma_v2: f64,
    sigma_x2: f64,
) -> f64 {
    let mut total = 0.0;
    for (i, a_i) in cascades.a.iter().enumerate() {
        let mut r = -(w * (base.column(i) + a_i * phi));
        r[i] += c(1.0, 0.0);
        total += vec_norm_sqr(&r);
    }
    if sigma_v2 > 0.0 {
        total += sigma_v2 / sigma_x2 * vec_norm_sqr(&(w * g * phi));
    }
    total
}

/// Projects every entry onto the unit circle; zero entries map to `1`.
pub fn truncate_passive(phi_o: &CVec) -> ReflectionState {
    let phi = phi_o.map(|z| {
        let r = z.norm();
        if r == 0.0 || !r.is_finite() {
            c(1.0, 0.0)
        } else {
            z / r
        }
    });
    ReflectionState {
        phi,
        mode: RisMode::Passive,
    }
}

/// Power drawn by an active surface:
/// `sum_i ‖diag(phi) f_i‖² sigma_x2 + ‖phi‖² sigma_v2`.
pub fn ris_power(phi: &CVec, f: &CMat, sigma_x2: f64, sigma_v2: f64) -> f64 {
    let incident: f64 = f
        .row_iter()
        .zip(phi.iter())
        .map(|(row, p)| p.norm_sqr() * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    incident * sigma_x2 + vec_norm_sqr(phi) * sigma_v2
}

/// Rescales `phi_o` so that the surface draws exactly `p_ris`.
pub fn truncate_active(
    phi_o: &CVec,
    f: &CMat,
    sigma_x2: f64,
    sigma_v2: f64,
    p_ris: f64,
) -> Result<ReflectionState> {
    let power = ris_power(phi_o, f, sigma_x2, sigma_v2);
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::DegenerateDesign(format!(
            "reflection vector draws power {power:e}"
        )));
    }
    let scale = (p_ris / power).sqrt();
    Ok(ReflectionState {
        phi: phi_o * c(scale, 0.0),
        mode: RisMode::Active,
    })
}

/// Sum over users of the normalized linear-MMSE error `1 - mu_k` for the
/// given reflection vector.
pub fn mmse_objective(
    ch: &ChannelSet,
    state: &ReflectionState,
    sigma_x2: f64,
    sigma_v2: f64,
    sigma_s2: f64,
) -> Result<f64> {
    let (heff, w) = linear_filters(ch, state, sigma_x2, sigma_v2, sigma_s2)?;
    objective_from(&heff, &w, sigma_x2)
}

fn linear_filters(
    ch: &ChannelSet,
    state: &ReflectionState,
    sigma_x2: f64,
    sigma_v2: f64,
    sigma_s2: f64,
) -> Result<(CMat, CMat)> {
    let heff = effective_channel(ch, &state.phi)?;
    let sv2 = effective_sigma_v2(state.mode, sigma_v2);
    let noise = noise_covariance(&ch.g, &state.phi, sv2, sigma_s2);
    let v = vec![sigma_x2; ch.users()];
    let w = filter_bank(&heff, &v, &noise, sigma_x2)?;
    Ok((heff, w))
}

fn effective_sigma_v2(mode: RisMode, sigma_v2: f64) -> f64 {
    match mode {
        RisMode::Passive => 0.0,
        RisMode::Active => sigma_v2,
    }
}

/// Result of the filter/reflection alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub state: ReflectionState,
    /// K x M linear MMSE filter bank for the final reflection vector.
    pub filters: CMat,
    /// `mmse_objective` at the initial point and after every round.
    pub objectives: Vec<f64>,
    /// Active mode: entries ending with gain below one.
    pub below_unit_gain: usize,
    /// Rounds that fell back to the minimum-norm solve.
    pub rank_deficient_rounds: usize,
    /// Rounds skipped because truncation would have raised the objective.
    pub rejected_rounds: usize,
}

/// Initial reflection vector: all-ones phases, rescaled onto the power
/// budget for an active surface.
pub fn initial_state(ch: &ChannelSet, mode: RisMode, budget: &PowerBudget, sigma_v2: f64) -> Result<ReflectionState> {
    let ones = CVec::from_element(ch.elements(), c(1.0, 0.0));
    match mode {
        RisMode::Passive => Ok(truncate_passive(&ones)),
        RisMode::Active => truncate_active(&ones, &ch.f, budget.sigma_x2, sigma_v2, budget.p_ris),
    }
}

/// Alternates up to `rounds` times between the linear MMSE filter bank for
/// the current reflection vector and the truncated reflection design for
/// that filter bank. The design's baseline is the direct channel, so the
/// quadratic it minimizes is the sum MSE over the full effective channel.
/// A truncated design that raises the objective is rejected and ends the
/// loop, so the recorded objectives never increase.
pub fn alternating_design(
    ch: &ChannelSet,
    mode: RisMode,
    budget: &PowerBudget,
    sigma_v2: f64,
    sigma_s2: f64,
    rounds: usize,
) -> Result<DesignOutcome> {
    let sv2 = effective_sigma_v2(mode, sigma_v2);
    let sx2 = budget.sigma_x2;
    let cascades = cascade_matrices(ch);
    let mut state = initial_state(ch, mode, budget, sv2)?;
    let (heff, mut filters) = linear_filters(ch, &state, sx2, sv2, sigma_s2)?;
    let mut objectives = vec![objective_from(&heff, &filters, sx2)?];
    let mut rank_deficient_rounds = 0;
    let mut rejected_rounds = 0;

    for _ in 0..rounds {
        let sol = solve_reflection(&filters, &cascades, &ch.direct, &ch.g, sv2, sx2)?;
        rank_deficient_rounds += usize::from(sol.rank_deficient);
        let candidate = match mode {
            RisMode::Passive => truncate_passive(&sol.phi),
            RisMode::Active => truncate_active(&sol.phi, &ch.f, sx2, sv2, budget.p_ris)?,
        };
        let (next_heff, next_filters) = linear_filters(ch, &candidate, sx2, sv2, sigma_s2)?;
        let value = objective_from(&next_heff, &next_filters, sx2)?;
        let current = *objectives.last().expect("initial objective");
        if value > current {
            // Same filters would give the same candidate again.
            rejected_rounds = rounds - (objectives.len() - 1);
            break;
        }
        state = candidate;
        filters = next_filters;
        objectives.push(value);
    }

    let below_unit_gain = match mode {
        RisMode::Passive => 0,
        RisMode::Active => state.phi.iter().filter(|z| z.norm() < 1.0).count(),
    };
    Ok(DesignOutcome {
        state,
        filters,
        objectives,
        below_unit_gain,
        rank_deficient_rounds,
        rejected_rounds,
    })
}

fn objective_from(heff: &CMat, filters: &CMat, sigma_x2: f64) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..heff.ncols() {
        let (mu, _) = gaussian_params_mmse(&filters.row(k).adjoint(), &heff.column(k).into_owned(), sigma_x2)?;
        total += 1.0 - mu;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, cols, |_, _| complex_gaussian(rng, 1.0))
    }

    #[test]
    fn zero_cascades_give_zero_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = rand_mat(2, 3, &mut rng);
        let g = rand_mat(3, 4, &mut rng);
        let base = rand_mat(3, 2, &mut rng);
        let cascades = CascadeSet {
            a: vec![CMat::zeros(3, 4); 2],
        };
        let sol = solve_reflection(&w, &cascades, &base, &g, 0.5, 1.0).unwrap();
        assert!(sol.phi.norm() < 1e-15);
    }

    #[test]
    fn scalar_design() {
        let (w, a, h, g) = (c(0.7, -0.2), c(1.1, 0.4), c(0.3, 0.9), c(-0.5, 0.6));
        let (sv2, sx2) = (0.3, 2.0);
        let sol = solve_reflection(
            &CMat::from_element(1, 1, w),
            &CascadeSet {
                a: vec![CMat::from_element(1, 1, a)],
            },
            &CMat::from_element(1, 1, h),
            &CMat::from_element(1, 1, g),
            sv2,
            sx2,
        )
        .unwrap();
        let wa = w * a;
        let expect = wa.conj() * (c(1.0, 0.0) - w * h) / (wa.norm_sqr() + sv2 / sx2 * (w * g).norm_sqr());
        assert!((sol.phi[0] - expect).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_design_falls_back_to_min_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // K=1, M=1: beta has rank 1 while N=4.
        let ch = ChannelSet::new(rand_mat(1, 1, &mut rng), rand_mat(1, 4, &mut rng), rand_mat(4, 1, &mut rng)).unwrap();
        let w = rand_mat(1, 1, &mut rng);
        let cascades = cascade_matrices(&ch);
        let sol = solve_reflection(&w, &cascades, &ch.direct, &ch.g, 0.0, 1.0).unwrap();
        assert!(sol.rank_deficient);
        let obj = design_objective(&w, &cascades, &ch.direct, &ch.g, &sol.phi, 0.0, 1.0);
        assert!(obj < 1e-20, "{obj}");
    }

    #[test]
    fn passive_truncation() {
        let t = truncate_passive(&CVec::from_vec(vec![c(2.0, 0.0), c(0.0, -3.0), c(0.0, 0.0)]));
        assert_eq!(t.phi[0], c(1.0, 0.0));
        assert_eq!(t.phi[1], c(0.0, -1.0));
        assert_eq!(t.phi[2], c(1.0, 0.0));
        assert_eq!(truncate_passive(&t.phi), t);
    }

    #[test]
    fn active_truncation_hits_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = rand_mat(6, 3, &mut rng);
        let phi = rand_mat(6, 1, &mut rng).column(0).into_owned();
        let t = truncate_active(&phi, &f, 2.0, 0.1, 5.0).unwrap();
        assert!((ris_power(&t.phi, &f, 2.0, 0.1) / 5.0 - 1.0).abs() < 1e-12);
        let again = truncate_active(&t.phi, &f, 2.0, 0.1, 5.0).unwrap();
        assert!((&again.phi - &t.phi).norm() < 1e-12 * t.phi.norm());
        let doubled = truncate_active(&phi, &f, 2.0, 0.1, 10.0).unwrap();
        assert!((&doubled.phi - &t.phi * c(2f64.sqrt(), 0.0)).norm() < 1e-12 * t.phi.norm());
        assert!(truncate_active(&CVec::zeros(6), &f, 2.0, 0.1, 5.0).is_err());
    }

    #[test]
    fn zero_rounds_return_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = ChannelSet::new(rand_mat(4, 2, &mut rng), rand_mat(4, 3, &mut rng), rand_mat(3, 2, &mut rng)).unwrap();
        let budget = PowerBudget {
            p_total: 2.0,
            p_user: 1.0,
            sigma_x2: 1.0,
            p_ris: 0.0,
        };
        let out = alternating_design(&ch, RisMode::Passive, &budget, 0.0, 0.1, 0).unwrap();
        assert_eq!(out.state.phi, CVec::from_element(3, c(1.0, 0.0)));
        assert_eq!(out.objectives.len(), 1);
    }

    #[test]
    fn passive_design_ignores_ris_noise_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = ChannelSet::new(rand_mat(4, 2, &mut rng), rand_mat(4, 3, &mut rng), rand_mat(3, 2, &mut rng)).unwrap();
        let budget = PowerBudget {
            p_total: 2.0,
            p_user: 1.0,
            sigma_x2: 1.0,
            p_ris: 0.0,
        };
        let a = alternating_design(&ch, RisMode::Passive, &budget, 0.0, 0.1, 3).unwrap();
        let b = alternating_design(&ch, RisMode::Passive, &budget, 1e9, 0.1, 3).unwrap();
        assert_eq!(a, b);
    }
}
