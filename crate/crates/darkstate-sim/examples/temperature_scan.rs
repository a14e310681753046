//! Retention against temperature: the thermal parameter sets the floor.
//!
//! The x axis scans mu = gamma_in/gamma_out (the effective photon
//! occupation), with gamma_out held fixed; the y axis ties both
//! dephasing rates together. The stationary retention depends only on
//! mu, not on dephasing, and is non-monotone: mu^1 weight competes with
//! the partition sum, peaking near mu ~ 0.4.

use darkstate_sim::config::preset;
use darkstate_sim::model::temperature_for_mu;
use darkstate_sim::sweep::run_heatmap;
use darkstate_sim::Result;

fn main() -> Result<()> {
    let cfg = preset("fig8")?;
    let mut block = cfg.heatmap.clone().unwrap();
    block.x.points = 9;
    block.y.points = 9;

    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(0);
    let map = run_heatmap(
        &space,
        &cfg.model,
        cfg.channels,
        [block.x.clone(), block.y.clone()],
        &initial,
        &cfg.integrator,
        &opts,
    )?;

    // Middle dephasing row: representative of the whole column since
    // retention is dephasing-independent at stationarity.
    let j = block.y.points / 2;
    println!("    mu    T/omega   t_stab   retention   (tied dephasing = {:.0})",
        map.axes[1].values()[j]);
    for (i, &mu) in map.axes[0].values().iter().enumerate() {
        println!(
            "{:6.2}   {:7.4}  {:7.3}    {:.6}",
            mu,
            temperature_for_mu(mu, 1.0)?,
            map.t_stab[[i, j]],
            map.p_ret[[i, j]]
        );
    }
    Ok(())
}
