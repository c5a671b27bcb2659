//! Renders the published reference numbers bundled with the crate. They
//! are fixtures for the report code, not results this crate can reproduce.

use stylevar::harness::reference::{image_driven_grid, summary_table, text_driven_grid};
use stylevar::harness::{parse_grid, render_grid, render_summary_markdown, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "## Per-method averages\n\n{}",
        render_summary_markdown(&summary_table())
    );
    println!(
        "## Image-driven baselines\n\n{}",
        render_grid(&image_driven_grid(), ReportFormat::Markdown)
    );
    println!(
        "## Text-driven baselines\n\n{}",
        render_grid(&text_driven_grid(), ReportFormat::Markdown)
    );

    let csv = render_grid(&image_driven_grid(), ReportFormat::Csv);
    let back = parse_grid(&csv, ReportFormat::Csv)?;
    println!("CSV round trip identical: {}", back == image_driven_grid());
    Ok(())
}
