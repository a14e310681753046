//! Bisect the coupling ratio where the scan shape changes character.
//!
//! Starting from the dark state, the sign of the first T_stab increment
//! along the dephasing grid classifies each parameter set: Zeno-first
//! (stabilization slows as measurement turns on) or anti-Zeno-first
//! (it speeds up). Sweeping k = g2/g1 flips the class at a threshold k0,
//! found here by bisection for several base couplings.

use darkstate_sim::config::preset;
use darkstate_sim::sweep::k0_scan;
use darkstate_sim::Result;

fn main() -> Result<()> {
    let cfg = preset("k0")?;
    let block = cfg.k0.clone().unwrap();
    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(0);

    let scan = k0_scan(
        &space,
        &cfg.model,
        cfg.channels,
        &block.to_spec(),
        &initial,
        &cfg.integrator,
        &opts,
    )?;

    for (i, &g1) in scan.g1.iter().enumerate() {
        let trail: Vec<String> = scan
            .evaluations
            .iter()
            .filter(|e| e.g1 == g1)
            .map(|e| format!("{:.3}:{}", e.k, &e.class.name()[..4]))
            .collect();
        println!("g1 = {:5.1}  k0 = {:.4}   [{}]", g1, scan.k0[i], trail.join(" "));
    }
    Ok(())
}
