//! A bare excited atom still ends up with dark-state weight.
//!
//! Starting from |0,01> (no photons, second atom excited) the dark
//! component is initially whatever the state's overlap happens to be,
//! yet the open dynamics steer the system toward the thermal mixture,
//! which holds a finite dark-state population. The trajectory's final
//! retention matches the steady state computed independently from the
//! Liouvillian null space.

use darkstate_sim::config::preset;
use darkstate_sim::integrate::evolve_partial;
use darkstate_sim::model::{build_channels, build_hamiltonian, dark_state};
use darkstate_sim::observables::fidelity_to_pure;
use darkstate_sim::sweep::steady_state_oracle;
use darkstate_sim::Result;

fn main() -> Result<()> {
    let mut cfg = preset("fig7")?;
    cfg.integrator.t_end = 10.0;

    let space = cfg.space()?;
    let h = build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating);
    let channels = build_channels(&space, &cfg.model, cfg.channels);
    let dark = dark_state(&space, &cfg.model, 0)?;
    let rho0 = cfg.initial_state()?.build(&space, &cfg.model)?;

    let (rec, diverged) = evolve_partial(&rho0, &h, &channels, &cfg.integrator, &dark)?;
    assert!(diverged.is_none());

    println!("      t    dark weight");
    let stride = rec.times.len() / 8;
    for k in (0..rec.times.len()).step_by(stride.max(1)) {
        println!("{:7.2}    {:.6}", rec.times[k], rec.dark_weight[k]);
    }

    let rho_ss = steady_state_oracle(&h, &channels)?;
    let target = fidelity_to_pure(&rho_ss, &dark)?;
    let last = *rec.dark_weight.last().unwrap();
    println!("final {last:.8} vs steady state {target:.8} (diff {:.2e})", (last - target).abs());
    Ok(())
}
