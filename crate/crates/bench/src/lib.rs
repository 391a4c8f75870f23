//! Shared fixtures for the integrator benchmarks.

use qpl_core::observables::PhysicalProbe;
use qpl_core::sde_physical::{default_initial_state, PhysicalStepper};
use qpl_core::{build_catalog, Ket, OperatorCatalog, RampProfile, RampSchedule, SystemParams};

/// Default parameters shortened to `t_final` time units with a ramp that
/// reaches its plateau at a fifth of the run.
pub fn short_params(t_final: f64) -> SystemParams {
    let d = SystemParams::default();
    SystemParams {
        t_final,
        ramp: RampSchedule {
            t_on: 0.0,
            t_rise: 0.2 * t_final,
            t_off: 0.8 * t_final,
            t_fall: 0.2 * t_final,
            profile: RampProfile::Sin2,
        },
        ..d
    }
}

pub struct PhysicalFixture {
    pub params: SystemParams,
    pub catalog: OperatorCatalog,
    pub stepper: PhysicalStepper,
    pub probe: PhysicalProbe,
    pub v0: Ket,
}

impl PhysicalFixture {
    pub fn new(params: SystemParams) -> Self {
        let catalog = build_catalog(&params).expect("catalog");
        let stepper = PhysicalStepper::new(&catalog, &params).expect("stepper");
        let probe = PhysicalProbe::new(&catalog);
        let v0 = default_initial_state(params.fock_dim);
        Self {
            params,
            catalog,
            stepper,
            probe,
            v0,
        }
    }
}
