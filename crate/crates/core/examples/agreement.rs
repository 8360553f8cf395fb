//! Agreement between three annotators on the same pairs.

use chrono::Utc;
use wugkit::ingest::parse_uses;
use wugkit::model::{validate_label, Judgment};
use wugkit::scheduler::generate_full_pairing;
use wugkit::stats::{agreement, compare_annotators, mean_labels, Scope};

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    let instances = generate_full_pairing(&uses)?;
    let close = [4, 1, 4, 1, 1, 1, 4, 1, 1, 1, 2, 1, 1, 4, 4];
    let near = [4, 2, 3, 1, 2, 0, 3, 1, 1, 1, 2, 1, 2, 4, 3];
    let far = [1, 4, 2, 3, 4, 4, 1, 3, 2, 4, 1, 4, 3, 2, 1];
    let mut judgments = Vec::new();
    for (name, labels) in [("ana", close), ("ben", near), ("cid", far)] {
        for (inst, &l) in instances.iter().zip(&labels) {
            judgments.push(Judgment::new(inst.pair.clone(), name, validate_label(l)?, Utc::now()));
        }
    }

    let report = agreement(&judgments);
    for p in &report.pairs {
        println!("{} / {}: rho {:?} over {} pairs", p.annotator1, p.annotator2, p.spearman.map(|r| (r * 1000.0).round() / 1000.0), p.overlap);
    }
    println!("mean rho {:?}, alpha {:?}", report.mean_spearman, report.alpha);
    println!("cannot decide: {:?}", report.cannot_decide);

    let c = compare_annotators(&judgments, "ana", "ben")?;
    println!("ana vs ben: {c:?}");
    println!("per annotator means: {:?}", mean_labels(&judgments, &uses, Scope::Annotator));
    println!("per grouping means: {:?}", mean_labels(&judgments, &uses, Scope::Grouping));
    Ok(())
}
