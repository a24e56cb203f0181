//! Renders the teacher prompt for one article and parses a few kinds of
//! model answers.

use mediatopic::corpus::Document;
use mediatopic::schema::LabelSchema;
use mediatopic::teacher::{build_prompt, parse_label_response, PromptTemplate};

fn main() {
    let schema = LabelSchema::builtin();
    let doc = Document::new("ex-1", "el", "News", "Η κυβέρνηση ανακοίνωσε νέα μέτρα για την οικονομία.");
    println!("{}", build_prompt(&doc, &schema));
    println!("template hash {}", PromptTemplate::new(&schema).hash());

    for answer in [
        r#"{"label": "economy, business and finance"}"#,
        "Label: politics",
        "It is either politics or society.",
        "I cannot tell.",
    ] {
        match parse_label_response(answer, &schema) {
            Ok(label) => println!("{answer:?} -> {}", label.id),
            Err(e) => println!("{answer:?} -> error: {e}"),
        }
    }
}
