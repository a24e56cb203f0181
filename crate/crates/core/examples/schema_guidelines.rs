//! Prints the label schema and the annotation guidelines derived from it.
//!
//! ```text
//! cargo run --example schema_guidelines
//! ```

use mediatopic::schema::{render_guidelines, LabelSchema};

fn main() {
    let schema = LabelSchema::builtin();
    println!("schema version {}", schema.version_date());
    for label in schema.labels() {
        println!("{:<45} {:?}", label.id, label.kind);
    }
    for raw in ["Sport", "  ECONOMY, business and finance ", "sports"] {
        match schema.canonicalize(raw) {
            Ok(l) => println!("{raw:?} -> {}", l.id),
            Err(e) => println!("{raw:?} -> {e}"),
        }
    }
    println!("\n{}", render_guidelines(&schema));
}
