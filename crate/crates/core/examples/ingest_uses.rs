//! Reads a uses file, prints concordance lines, then shows the validation
//! report for a broken file.

use wugkit::ingest::{parse_uses, serialize_uses};
use wugkit::Error;

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    for u in &uses {
        let (left, target, right) = u.concordance();
        let tail: String = left.chars().rev().take(30).collect::<Vec<_>>().into_iter().rev().collect();
        let head: String = right.chars().take(30).collect();
        println!("{:>2} {:>4} {:>30} [{}] {}", u.id, u.grouping.as_deref().unwrap_or("-"), tail, target, head);
    }
    assert_eq!(serialize_uses(&uses), serialize_uses(&parse_uses(&serialize_uses(&uses))?));

    let broken = b"lemma,identifier,context,indexes_target_token\n\
arm,x1,an arm,3:9\n\
arm,x1,an arm,3:6\n\
arm,,no id,0:2\n";
    match parse_uses(broken) {
        Err(Error::Validation(report)) => {
            println!("\n{} problems:", report.errors.len());
            for e in &report.errors {
                println!("  line {}: {}", e.line, e.message);
            }
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
