//! Fixtures shared by the criterion benches.

use lure_pcac_core::config::load_preset;
use lure_pcac_core::lure::{simulate_with_observer, SimulationConfig};
use lure_pcac_core::rls::RlsState;
use lure_pcac_core::stability::Checkpoint;

pub fn preset(name: &str) -> SimulationConfig {
    load_preset(name, &[]).expect("built-in preset")
}

/// Controller data and RLS state of preset `name` frozen at step `k`.
pub fn frozen(name: &str, k: usize) -> (SimulationConfig, Checkpoint, RlsState) {
    let mut cfg = preset(name);
    cfg.k_final = k;
    let mut out = None;
    simulate_with_observer(&cfg, |snap| {
        if snap.k == k {
            out = Some((
                Checkpoint {
                    k,
                    model: snap.model.clone(),
                    realization: snap.realization.clone(),
                    gain: snap.gain.clone(),
                },
                snap.rls.clone(),
            ));
        }
        Ok(())
    })
    .expect("simulation runs");
    let (cp, rls) = out.expect("step reached");
    (cfg, cp, rls)
}
