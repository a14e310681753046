//! The three-state truncation reproduces the full model exactly when
//! dephasing is the only open channel.
//!
//! Under pure dephasing the single-excitation manifold {|0,01>, |0,10>,
//! |1,00>} is invariant: the Hamiltonian conserves excitation number and
//! the dephasing operators are diagonal. A dark-state trajectory in the
//! compressed 3x3 space therefore matches the 12-dimensional run sample
//! by sample, and its fidelity settles at the 1/3 mixture value.

use darkstate_sim::config::preset;
use darkstate_sim::hilbert::pure_density;
use darkstate_sim::integrate::evolve_partial;
use darkstate_sim::linalg::CVec;
use darkstate_sim::model::{
    build_channels, build_hamiltonian, compress, dark_state, reduced_projection, LindbladChannel,
};
use darkstate_sim::Result;

fn main() -> Result<()> {
    let cfg = preset("reduced")?;
    let space = cfg.space()?;
    let h_full = build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating);
    let channels_full = build_channels(&space, &cfg.model, cfg.channels);
    let dark_full = dark_state(&space, &cfg.model, 0)?;
    let rho0_full = pure_density(&dark_full);

    let (full, _) = evolve_partial(&rho0_full, &h_full, &channels_full, &cfg.integrator, &dark_full)?;

    // Same run compressed onto the manifold.
    let (indices, _) = reduced_projection(&space);
    let h = compress(&space, &indices, &h_full);
    let channels: Vec<LindbladChannel> = channels_full
        .iter()
        .map(|ch| LindbladChannel {
            kind: ch.kind,
            rate: ch.rate,
            op: compress(&space, &indices, &ch.op),
        })
        .collect();
    let mut dark: CVec = CVec::zeros(indices.len());
    for (r, &i) in indices.iter().enumerate() {
        dark[r] = dark_full[i];
    }
    let rho0 = pure_density(&dark);
    let (reduced, _) = evolve_partial(&rho0, &h, &channels, &cfg.integrator, &dark)?;

    println!("      t    fidelity(3x3)   fidelity(12x12)");
    let stride = reduced.times.len() / 10;
    for k in (0..reduced.times.len()).step_by(stride.max(1)) {
        println!(
            "{:7.3}       {:.6}         {:.6}",
            reduced.times[k], reduced.dark_weight[k], full.dark_weight[k]
        );
    }

    let max_gap = reduced
        .dark_weight
        .iter()
        .zip(&full.dark_weight)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let last = *reduced.dark_weight.last().unwrap();
    println!("max |reduced - full| = {max_gap:.3e}");
    println!("asymptote {last:.6} (1/3 = {:.6})", 1.0 / 3.0);
    Ok(())
}
