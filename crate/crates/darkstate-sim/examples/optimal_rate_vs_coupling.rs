//! Track the optimal dephasing rate as the coupling strength grows.
//!
//! For each symmetric coupling g the diagonal scan has a dephasing rate
//! gamma_min that reaches stationarity fastest. Stronger coupling means
//! faster coherent recycling through the cavity, which tolerates (and
//! rewards) stronger measurement before the Zeno freeze sets in, so
//! gamma_min grows with g while the optimal time shrinks.

use darkstate_sim::config::preset;
use darkstate_sim::sweep::gmin_vs_g;
use darkstate_sim::Result;

fn main() -> Result<()> {
    let mut cfg = preset("gmin")?;
    let mut block = cfg.gmin.take().unwrap();
    // Coarser than the full study: every other coupling, half the gamma
    // resolution. Keeps the example under ten seconds.
    block.g_values = vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0];
    block.gamma.points = 41;

    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(0);
    let series = gmin_vs_g(
        &space,
        &cfg.model,
        cfg.channels,
        &block.g_values,
        (block.gamma.min, block.gamma.max),
        block.gamma.points,
        &initial,
        &cfg.integrator,
        &opts,
    )?;

    println!("    g   gamma_min     t_min   retention");
    for p in &series {
        println!(
            "{:5.1}   {:9.3}  {:8.3}   {:.6}",
            p.g,
            p.gamma_min.unwrap_or(f64::NAN),
            p.t_min.unwrap_or(f64::NAN),
            p.p_ret_min.unwrap_or(f64::NAN)
        );
        assert!(!p.boundary_minimum, "scan range fails to bracket the minimum");
    }
    Ok(())
}
