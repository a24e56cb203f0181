//! Ingest raw records, keep news, truncate to a word limit.

use std::collections::BTreeSet;
use std::io::Cursor;

use mediatopic::corpus::{filter_news, ingest, preprocess, DEFAULT_NEWS_TAG};

const RAW: &str = r#"{"id": "1", "lang": "sl", "genre": "News", "body": "Vlada je danes sprejela nov proračun za prihodnje leto."}
{"id": "2", "lang": "hr", "genre": "Forum", "body": "Tko zna dobar recept za sarmu?"}
{"id": "3", "lang": "de", "genre": "News", "body": "Nicht in der Auswahl."}
{"id": "1", "lang": "sl", "genre": "News", "body": "Duplicate id."}
not json at all
{"id": "4", "lang": "ca", "genre": "News", "body": "El Barça guanya la lliga després d'una temporada molt llarga i difícil."}
"#;

fn main() -> mediatopic::Result<()> {
    let langs: BTreeSet<String> = ["sl", "hr", "el", "ca"].map(String::from).into();
    let (store, mut stats) = ingest(Cursor::new(RAW), &langs)?;
    println!("accepted {} of {}; rejected {:?}", stats.accepted, stats.total_ingested, stats.rejected);

    let news: Vec<_> = filter_news(store.docs(), DEFAULT_NEWS_TAG).into_iter().cloned().collect();
    let short = preprocess(&news, 6, &mut stats);
    for d in &short {
        println!("{} [{}] {}", d.id, d.lang, d.body);
    }
    Ok(())
}
