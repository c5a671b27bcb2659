//! Runs the gated sampler under two different style conditions and shows
//! the trajectories only part ways once the gate opens.

use stylevar::conditioning::{first_divergence, gated_sample, AttentionWeights, SamplerConfig, TokenSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = 8;
    let weights = AttentionWeights::from_seed(dim, 7)?;
    let init = TokenSequence::random(16, dim, 8)?;
    let oil = TokenSequence::random(4, dim, 9)?;
    let ink = TokenSequence::random(4, dim, 10)?;

    for gate in [30, 45, 50] {
        let cfg = SamplerConfig {
            gate_step: gate,
            ..SamplerConfig::default()
        };
        let a = gated_sample(&init, &oil, &cfg, &weights)?;
        let b = gated_sample(&init, &ink, &cfg, &weights)?;
        match first_divergence(&a, &b) {
            Some(step) => {
                let gap = (a[cfg.total_steps].latent.matrix() - b[cfg.total_steps].latent.matrix()).norm();
                println!(
                    "T={} G={gate}: first divergence at step {step}, final gap {gap:.3e}",
                    cfg.total_steps
                );
            }
            None => println!("T={} G={gate}: trajectories identical", cfg.total_steps),
        }
    }
    Ok(())
}
