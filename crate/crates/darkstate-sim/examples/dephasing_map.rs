//! Map stabilization time over the two dephasing rates independently.
//!
//! With equal couplings the model is invariant under swapping the atoms,
//! so the map is exactly symmetric across its diagonal. The rendered
//! shades are min-max normalized: '.' is the fastest stabilization, '@'
//! the slowest.

use darkstate_sim::config::preset;
use darkstate_sim::sweep::run_heatmap;
use darkstate_sim::Result;

const SHADES: &[u8] = b".:-=+*#%@";

fn main() -> Result<()> {
    let cfg = preset("fig3")?;
    let mut block = cfg.heatmap.clone().unwrap();
    block.x.points = 13;
    block.y.points = 13;

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

    let n = block.x.points;
    println!(
        "t_stab over gamma_deph1 (rows) x gamma_deph2 (cols), both 0..{}",
        block.x.max
    );
    for i in 0..n {
        let mut row = String::new();
        for j in 0..n {
            let v = map.t_stab_norm[[i, j]];
            let idx = (v * (SHADES.len() - 1) as f64).round() as usize;
            row.push(SHADES[idx.min(SHADES.len() - 1)] as char);
            row.push(' ');
        }
        println!("  {row}");
    }
    println!(
        "t_stab range [{:.3}, {:.3}], retention range [{:.4}, {:.4}]",
        map.t_stab_range.0, map.t_stab_range.1, map.p_ret_range.0, map.p_ret_range.1
    );

    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((map.t_stab[[i, j]] - map.t_stab[[j, i]]).abs());
        }
    }
    println!("swap asymmetry max|t[i,j]-t[j,i]| = {asym:.3e}");
    Ok(())
}
