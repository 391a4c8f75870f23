//! Derived quantities: parity and XX variances, Bell overlaps, the
//! reduced-filter residual error, and closed-form steady-state diagnostics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{Ket, Op, OperatorCatalog, SpaceSpec, EXCITED, MINUS, PLUS};
use crate::params::SystemParams;

/// Normalization tolerance for observable evaluation.
pub const NORM_TOL: f64 = 1e-9;
/// Floor on the physical variance in [`fractional_residual_error`].
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Column ids of the physical observable table, in output order.
pub const PHYSICAL_COLUMNS: [&str; 15] = [
    "alpha",
    "var_zz",
    "var_xx",
    "mean_zz",
    "bell_plus",
    "bell_minus",
    "pop_e1",
    "pop_e2",
    "homodyne_mean_rate",
    "pop_c1",
    "pop_c2",
    "b1_re",
    "b1_im",
    "b2_re",
    "b2_im",
];

/// Observables of the physical state at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableSet {
    pub alpha: f64,
    pub var_zz: f64,
    pub var_xx: f64,
    pub mean_zz: f64,
    /// Overlap with 2^{-1/2}(|++⟩ + |−−⟩).
    pub bell_plus: f64,
    /// Overlap with 2^{-1/2}(|+−⟩ + |−+⟩).
    pub bell_minus: f64,
    pub pop_e1: f64,
    pub pop_e2: f64,
    /// ⟨L + L†⟩
    pub homodyne_mean_rate: f64,
    /// Population of the cavity-coupled levels {|+⟩, |e⟩} of atom 1.
    pub pop_c1: f64,
    pub pop_c2: f64,
    pub b1: Complex64,
    pub b2: Complex64,
    /// Largest population in the highest retained Fock level of either cavity.
    pub top_fock_pop: f64,
}

impl ObservableSet {
    pub fn get(&self, id: &str) -> Option<f64> {
        Some(match id {
            "alpha" => self.alpha,
            "var_zz" => self.var_zz,
            "var_xx" => self.var_xx,
            "mean_zz" => self.mean_zz,
            "bell_plus" => self.bell_plus,
            "bell_minus" => self.bell_minus,
            "pop_e1" => self.pop_e1,
            "pop_e2" => self.pop_e2,
            "homodyne_mean_rate" => self.homodyne_mean_rate,
            "pop_c1" => self.pop_c1,
            "pop_c2" => self.pop_c2,
            "b1_re" => self.b1.re,
            "b1_im" => self.b1.im,
            "b2_re" => self.b2.re,
            "b2_im" => self.b2.im,
            _ => return None,
        })
    }

    /// Values in [`PHYSICAL_COLUMNS`] order.
    pub fn row(&self) -> [f64; PHYSICAL_COLUMNS.len()] {
        PHYSICAL_COLUMNS.map(|id| self.get(id).expect("column ids are known"))
    }
}

/// Precomputed index tables and operators for evaluating [`ObservableSet`]s.
#[derive(Debug, Clone)]
pub struct PhysicalProbe {
    space: SpaceSpec,
    /// `true` where σZ⁽¹⁾σZ⁽²⁾ = +1.
    zz_even: Vec<bool>,
    levels: Vec<(u8, u8, u8, u8)>,
    xx: Op,
    b1: Op,
    b2: Op,
    l0: Op,
}

impl PhysicalProbe {
    pub fn new(catalog: &OperatorCatalog) -> Self {
        let space = catalog.space;
        let dim = space.total_dim();
        let mut zz_even = Vec::with_capacity(dim);
        let mut levels = Vec::with_capacity(dim);
        for i in 0..dim {
            let (a1, n1, a2, n2) = space.decompose(i);
            zz_even.push((a1 != MINUS) == (a2 != MINUS));
            levels.push((a1 as u8, n1 as u8, a2 as u8, n2 as u8));
        }
        Self {
            space,
            zz_even,
            levels,
            xx: catalog.parity_xx(),
            b1: catalog.b1.clone(),
            b2: catalog.b2.clone(),
            l0: catalog.measurement_l0.clone(),
        }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    /// Evaluates all observables on a normalized state at probe amplitude α.
    pub fn measure(&self, v: &Ket, alpha: f64) -> Result<ObservableSet> {
        check_normalized(v)?;
        let top = (self.space.fock_dim() - 1) as u8;
        let (mut p_even, mut p_odd) = (0.0, 0.0);
        let (mut pe1, mut pe2, mut pc1, mut pc2) = (0.0, 0.0, 0.0, 0.0);
        let (mut top1, mut top2) = (0.0, 0.0);
        for (i, a) in v.as_slice().iter().enumerate() {
            let p = a.norm_sqr();
            if self.zz_even[i] {
                p_even += p;
            } else {
                p_odd += p;
            }
            let (a1, n1, a2, n2) = self.levels[i];
            if a1 == EXCITED as u8 {
                pe1 += p;
            }
            if a2 == EXCITED as u8 {
                pe2 += p;
            }
            if a1 != MINUS as u8 {
                pc1 += p;
            }
            if a2 != MINUS as u8 {
                pc2 += p;
            }
            if n1 == top {
                top1 += p;
            }
            if n2 == top {
                top2 += p;
            }
        }
        let total = p_even + p_odd;
        let mean_zz = (p_even - p_odd) / total;
        let var_zz = 4.0 * p_even * p_odd / (total * total);

        let xv = self.xx.apply(v);
        let mean_xx = v.inner(&xv).re;
        let var_xx = (xv.norm_sqr() - mean_xx * mean_xx).max(0.0);

        let (bell_plus, bell_minus) = bell_overlaps_unchecked(v, self.space);
        let l0 = v.inner(&self.l0.apply(v)).re;

        Ok(ObservableSet {
            alpha,
            var_zz,
            var_xx,
            mean_zz,
            bell_plus,
            bell_minus,
            pop_e1: pe1,
            pop_e2: pe2,
            homodyne_mean_rate: 2.0 * l0 + 2.0 * alpha,
            pop_c1: pc1,
            pop_c2: pc2,
            b1: v.inner(&self.b1.apply(v)),
            b2: v.inner(&self.b2.apply(v)),
            top_fock_pop: f64::max(top1, top2),
        })
    }
}

fn check_normalized(v: &Ket) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// `⟨op²⟩ − ⟨op⟩²` on a normalized state, clamped at zero. `op` must be
/// Hermitian.
pub fn variance(op: &Op, v: &Ket) -> Result<f64> {
    check_normalized(v)?;
    if op.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v.dim(),
        });
    }
    let w = op.apply(v);
    let mean = v.inner(&w).re;
    Ok((w.norm_sqr() - mean * mean).max(0.0))
}

/// Bell-state populations `(even, odd)` of the atomic ground qubits, traced
/// over the cavities. |e⟩ population counts toward neither.
pub fn bell_overlaps(v: &Ket, space: SpaceSpec) -> Result<(f64, f64)> {
    check_normalized(v)?;
    if v.dim() != space.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.total_dim(),
            got: v.dim(),
        });
    }
    Ok(bell_overlaps_unchecked(v, space))
}

fn bell_overlaps_unchecked(v: &Ket, space: SpaceSpec) -> (f64, f64) {
    let n = space.fock_dim();
    let a = v.as_slice();
    let (mut even, mut odd) = (0.0, 0.0);
    for n1 in 0..n {
        for n2 in 0..n {
            let pp = a[space.index(PLUS, n1, PLUS, n2)];
            let mm = a[space.index(MINUS, n1, MINUS, n2)];
            let pm = a[space.index(PLUS, n1, MINUS, n2)];
            let mp = a[space.index(MINUS, n1, PLUS, n2)];
            even += 0.5 * (pp + mm).norm_sqr();
            odd += 0.5 * (pm + mp).norm_sqr();
        }
    }
    (even, odd)
}

/// `|var_phys − var_rf| / max(var_phys, ε)` with ε = 1e−12.
pub fn fractional_residual_error(var_phys: f64, var_rf: f64) -> f64 {
    (var_phys - var_rf).abs() / var_phys.max(VARIANCE_FLOOR)
}

/// Fisher-information rate `(2α sin 2θ (γκ/g)²)²` of the next homodyne
/// increment about the within-parity mixing angle θ, per unit time.
pub fn fisher_information(theta: f64, params: &SystemParams) -> f64 {
    let ratio = params.gamma_sq() * params.kappa_sq() / (params.g * params.g);
    (2.0 * params.alpha_max * (2.0 * theta).sin() * ratio).powi(2)
}

/// Equilibrium lower bound `1 − exp(−8α²/κ²)` on Var(σX⁽¹⁾σX⁽²⁾).
pub fn xx_variance_bound(params: &SystemParams) -> f64 {
    let a = params.alpha_max;
    1.0 - (-8.0 * a * a / params.kappa_sq()).exp()
}

/// Plateau excited-state population scale `(ακ/g)²`.
pub fn excited_population_scale(params: &SystemParams) -> f64 {
    (params.alpha_max * params.kappa() / params.g).powi(2)
}

/// Plateau spontaneous-emission rate of a cavity-coupled atom, `(γακ/g)²`.
pub fn emission_rate_scale(params: &SystemParams) -> f64 {
    params.gamma_sq() * excited_population_scale(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{atom_state, build_catalog, coherent_state, fock_state, product_state};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn default_initial(n: usize) -> Ket {
        let x = atom_state(PLUS).add(&atom_state(MINUS)).scaled(c(0.5f64.sqrt()));
        let vac = fock_state(0, n);
        product_state(&x, &vac, &x, &vac)
    }

    #[test]
    fn variance_cases() {
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let zz = cat.parity_zz();
        let s = cat.space;
        let eig = Ket::basis(s.total_dim(), s.index(PLUS, 0, MINUS, 0));
        assert!(variance(&zz, &eig).unwrap().abs() < 1e-15);
        let v0 = default_initial(s.fock_dim());
        assert!((variance(&zz, &v0).unwrap() - 1.0).abs() < 1e-14);
        let mix = Ket::basis(s.total_dim(), s.index(PLUS, 0, PLUS, 0))
            .add(&Ket::basis(s.total_dim(), s.index(PLUS, 0, MINUS, 0)))
            .scaled(c(0.5f64.sqrt()));
        assert!((variance(&zz, &mix).unwrap() - 1.0).abs() < 1e-14);
        assert!(variance(&zz, &eig.scaled(c(2.0))).is_err());
    }

    #[test]
    fn bell_cases() {
        let s = SpaceSpec::new(4).unwrap();
        let v0 = default_initial(4);
        let (e, o) = bell_overlaps(&v0, s).unwrap();
        assert!((e - 0.5).abs() < 1e-14 && (o - 0.5).abs() < 1e-14);

        let vac = fock_state(0, 4);
        let bell = product_state(&atom_state(PLUS), &vac, &atom_state(PLUS), &vac)
            .add(&product_state(&atom_state(MINUS), &vac, &atom_state(MINUS), &vac))
            .scaled(c(0.5f64.sqrt()));
        let (e, o) = bell_overlaps(&bell, s).unwrap();
        assert!((e - 1.0).abs() < 1e-14 && o.abs() < 1e-14);

        let pm = product_state(&atom_state(PLUS), &vac, &atom_state(MINUS), &vac);
        let (e, o) = bell_overlaps(&pm, s).unwrap();
        assert!(e.abs() < 1e-15 && (o - 0.5).abs() < 1e-14);
    }

    #[test]
    fn residual_error_cases() {
        assert_eq!(fractional_residual_error(0.5, 0.5), 0.0);
        assert!((fractional_residual_error(1e-4, 1.8e-4) - 0.8).abs() < 1e-12);
        assert_eq!(fractional_residual_error(0.0, 0.0), 0.0);
    }

    #[test]
    fn fisher_cases() {
        let p = SystemParams::default();
        assert_eq!(fisher_information(0.0, &p), 0.0);
        let quarter = fisher_information(std::f64::consts::FRAC_PI_4, &p);
        assert!((quarter - 8.1e-5).abs() < 1e-12);
        // Maximizer on a fine grid over [0, π/2).
        let best = (0..10_000)
            .map(|k| k as f64 * std::f64::consts::FRAC_PI_2 / 10_000.0)
            .max_by(|a, b| fisher_information(*a, &p).total_cmp(&fisher_information(*b, &p)))
            .unwrap();
        assert!((best - std::f64::consts::FRAC_PI_4).abs() < 1e-3);
    }

    #[test]
    fn xx_bound_cases() {
        let mut p = SystemParams::default();
        assert!((xx_variance_bound(&p) - 0.034_930_882_210_32).abs() < 1e-12);
        p.alpha_max = 0.0;
        assert_eq!(xx_variance_bound(&p), 0.0);
        let mut prev = -1.0;
        for k in 0..20 {
            p.alpha_max = 0.05 * k as f64;
            let b = xx_variance_bound(&p);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn scales_at_defaults() {
        let p = SystemParams::default();
        assert!((excited_population_scale(&p) - 9e-4).abs() < 1e-15);
        assert!((emission_rate_scale(&p) - 9e-4).abs() < 1e-15);
    }

    #[test]
    fn xx_variance_of_even_cat_matches_bound() {
        // |++⟩|00⟩ + |−−⟩|β₁β₂⟩ with the dd steady amplitudes.
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let n = p.fock_dim;
        let beta = 2.0 * p.alpha_max / p.kappa();
        let vac = fock_state(0, n);
        let c1 = coherent_state(c(-beta), n).unwrap();
        let c2 = coherent_state(c(beta), n).unwrap();
        let v = product_state(&atom_state(PLUS), &vac, &atom_state(PLUS), &vac)
            .add(&product_state(&atom_state(MINUS), &c1, &atom_state(MINUS), &c2))
            .normalized()
            .unwrap();
        let probe = PhysicalProbe::new(&cat);
        let obs = probe.measure(&v, p.alpha_max).unwrap();
        assert!((obs.var_xx - xx_variance_bound(&p)).abs() < 1e-6);
        assert!(obs.var_zz < 1e-15);
        assert!((obs.var_zz - (1.0 - obs.mean_zz.powi(2))).abs() < 1e-12);
    }
}
