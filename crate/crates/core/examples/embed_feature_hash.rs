//! Embeds interactions with the feature-hashing embedder and round-trips
//! the vectors through the binary vector file format.
//!
//!     cargo run -p sevbench --example embed_feature_hash

use chrono::Utc;
use sevbench::embedding::{embed, read_vectors_with_dim, write_vectors, EmbedderSpec};
use sevbench::model::{AgentRoute, Interaction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let now = Utc::now();
    let pool = vec![
        Interaction::new("a", "how do i merge profiles", "open identity graph settings", now, AgentRoute::ConceptualDocs),
        Interaction::new("b", "how do i merge two profiles", "open identity graph settings", now, AgentRoute::ConceptualDocs),
        Interaction::new("c", "count events by day", "select count(*) from events group by day", now, AgentRoute::StructuredData),
    ];

    let vectors = embed(&EmbedderSpec::feature_hash(128, 0), &pool)?;
    let cos = |i: usize, j: usize| -> f32 {
        let (x, y) = (&vectors[i].values, &vectors[j].values);
        let dot: f32 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let norm = |v: &[f32]| v.iter().map(|a| a * a).sum::<f32>().sqrt();
        dot / (norm(x) * norm(y))
    };
    println!("cos(a, b) = {:.3}", cos(0, 1));
    println!("cos(a, c) = {:.3}", cos(0, 2));

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("vectors.bin");
    write_vectors(&vectors, &path)?;
    let (dim, back) = read_vectors_with_dim(&path)?;
    println!("read back {} vectors of dimension {dim}", back.len());
    assert_eq!(back, vectors);
    Ok(())
}
