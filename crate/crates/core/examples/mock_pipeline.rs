//! Runs one photo through all three stages against the mock services over
//! loopback HTTP, then shows the verification retry on a weak caption.

use std::collections::BTreeMap;

use stylevar::backends::mock::{MockFixtures, MockServer};
use stylevar::backends::{BackendEndpoint, Backends, Route, ServiceEndpoints};
use stylevar::dataset::{ImageRecord, StyleId};
use stylevar::pipeline::{Pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut fixtures = MockFixtures::boat_scene();
    // the unconditioned caption under-describes the bridge
    let boat = fixtures.images.get_mut("boat.png").expect("boat fixture");
    boat.scores.insert("bridge".into(), 0.30);
    boat.conditional_scores = BTreeMap::from([("boat".into(), 0.93), ("bridge".into(), 0.75)]);

    let server = MockServer::start(fixtures)?;
    println!("mock services on {}", server.url());
    let backends = Backends::http(&ServiceEndpoints::single(BackendEndpoint::new(server.url())))?;
    let pipeline = Pipeline::new(backends, PipelineConfig::default())?;

    let record = ImageRecord {
        id: "boat-001".into(),
        path: "boat.png".into(),
        style: StyleId::Photo,
        subcategory: None,
        annotation: "a boat on a river near a bridge".into(),
    };
    let run = pipeline.run_variation(&record, StyleId::RealisticOil)?;
    let content = run.content.as_ref().expect("content stage ran");
    println!("caption ({} attempts): {}", content.attempts, content.caption);
    println!(
        "verification: {:?} -> {:?}",
        content.verification.labels, content.verification.scores
    );
    println!("style: {}", run.style_description.as_deref().unwrap_or(""));
    println!("prompt: {}", run.prompt.as_deref().unwrap_or(""));
    let request = run.request.as_ref().expect("generation request");
    println!(
        "seed {} steps {} gate {}",
        request.seed, request.total_steps, request.gate_step
    );
    println!("image: {}", run.image_ref.as_deref().unwrap_or(""));
    println!("caption calls: {}", server.responder().call_count(Route::Caption));

    match pipeline.run_variation(&record, StyleId::Photo) {
        Err(e) => println!("identity request rejected: {e}"),
        Ok(_) => println!("identity request unexpectedly accepted"),
    }
    Ok(())
}
