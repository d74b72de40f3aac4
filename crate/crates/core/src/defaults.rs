//! Reference operating points.
//!
//! The chaotic and periodic points below were picked from the bifurcation
//! sweeps committed under `fixtures/`. The buck needs a large divider ratio
//! `r1 / r2` before its comparator crossings become unstable, so the
//! reference buck uses `r2 = 250` rather than the nominal 10 kOhm.

use crate::analysis::{ConverterSetup, SweepSettings};
use crate::control::RampParams;
use crate::dynamics::{BoostParams, BoostState, BuckParams, BuckState, IntegratorConfig};
use crate::link::{InitialState, LinkConfig, MaskingGains, MessageSource};

pub const BUCK_R2: f64 = 250.0;
pub const BUCK_CHAOTIC_V_IN: f64 = 60.0;
pub const BUCK_PERIODIC_V_IN: f64 = 10.0;
pub const BUCK_SWEEP: (f64, f64, usize) = (10.0, 100.0, 181);

pub const BOOST_CHAOTIC_I_REF: f64 = 3.2;
pub const BOOST_PERIODIC_I_REF: f64 = 0.5;
/// Period-2 setting used to check two-cluster detection.
pub const BOOST_PERIOD2_I_REF: f64 = 2.0;
pub const BOOST_SWEEP: (f64, f64, usize) = (0.5, 4.0, 351);

/// The link's boost runs period-1: two chaotic boosts driven only by a
/// common clock never synchronize, so the receiver could not regenerate it.
pub const LINK_BOOST_I_REF: f64 = 1.2;
pub const LINK_G2: f64 = 0.2;

pub fn buck_params() -> BuckParams {
    BuckParams {
        v_in: BUCK_CHAOTIC_V_IN,
        r2: BUCK_R2,
        ..BuckParams::default()
    }
}

pub fn boost_params() -> BoostParams {
    BoostParams {
        i_ref: BOOST_CHAOTIC_I_REF,
        ..BoostParams::default()
    }
}

/// Fresh-start state of each converter: empty inductor, output at the supply.
pub fn initial_buck() -> BuckState {
    BuckState::new(0.0, 0.0)
}

pub fn initial_boost(p: &BoostParams) -> BoostState {
    BoostState::new(0.0, p.v_in)
}

/// Standalone converters at their chaotic reference points.
pub fn converter_setup() -> ConverterSetup {
    let boost = boost_params();
    ConverterSetup {
        buck: buck_params(),
        ramp: RampParams::default(),
        boost,
        buck_initial: initial_buck(),
        boost_initial: initial_boost(&boost),
        integrator: None,
    }
}

pub fn sweep_settings() -> SweepSettings {
    SweepSettings::default()
}

pub fn message() -> MessageSource {
    MessageSource::Sine {
        amplitude: 0.5,
        frequency: 50.0,
        phase: 0.0,
    }
}

pub fn triangle_message() -> MessageSource {
    MessageSource::Triangle {
        amplitude: 0.5,
        frequency: 50.0,
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        let boost = BoostParams {
            i_ref: LINK_BOOST_I_REF,
            ..BoostParams::default()
        };
        LinkConfig {
            buck: buck_params(),
            boost,
            ramp: RampParams::default(),
            gains: MaskingGains { g1: 1.0, g2: LINK_G2 },
            integrator: IntegratorConfig::for_period(boost.t_clk),
            duration: 0.2,
            sample_step: 1e-5,
            transient_cut: 0.05,
            tx_initial: InitialState {
                buck: initial_buck(),
                boost: initial_boost(&boost),
            },
            rx_initial: InitialState {
                buck: BuckState::new(0.5, 3.0),
                boost: BoostState::new(1.0, 15.0),
            },
            rx_seeded: false,
        }
    }
}
