//! Window partitioning, per-window self-attention and cross-attention of a
//! latent onto a style encoding.

use stylevar::conditioning::{
    cross_attention_traced, style_encode, window_attention_traced, window_partition, AttentionWeights, TokenSequence,
    WindowConfig,
};
use stylevar::metrics::FeatureMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (c, h, w) = (4, 4, 6);
    let values: Vec<f64> = (0..c * h * w).map(|i| ((i * 37) % 11) as f64 / 10.0 - 0.5).collect();
    let fm = FeatureMap::new(c, h, w, values)?;
    let cfg = WindowConfig::new(2)?;
    let windows = window_partition(&fm, cfg)?;
    println!(
        "{}x{} grid, window 2: {} windows of {} tokens",
        h,
        w,
        windows.len(),
        windows[0].len()
    );

    let weights = AttentionWeights::from_seed(c, 11)?;
    let trace = window_attention_traced(&windows[0], &weights)?;
    println!("window 0 attention (rows sum to 1):");
    for r in 0..trace.weights.nrows() {
        let row = trace.weights.row(r);
        println!(
            "  {:.4} {:.4} {:.4} {:.4}  sum={:.12}",
            row[0],
            row[1],
            row[2],
            row[3],
            row.sum()
        );
    }

    let style = style_encode(&fm, cfg, &weights)?;
    println!("style encoding: {} tokens x {} channels", style.len(), style.dim());

    let latent = TokenSequence::random(3, c, 5)?;
    let cross = cross_attention_traced(&latent, &style, &weights)?;
    println!(
        "cross-attention weights: {} queries over {} style tokens",
        cross.weights.nrows(),
        cross.weights.ncols()
    );
    println!("first output token: {:?}", cross.output.row(0));
    Ok(())
}
