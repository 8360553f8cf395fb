//! Full pairing of the arm uses and the order in which two annotators see them.

use std::collections::HashSet;

use wugkit::ingest::parse_uses;
use wugkit::scheduler::{build_sequence, derive_seed, generate_full_pairing, next_instance, Next};

const ARM: &[u8] = include_bytes!("../fixtures/arm_uses.csv");

fn main() -> wugkit::Result<()> {
    let uses = parse_uses(ARM)?;
    let instances = generate_full_pairing(&uses)?;
    println!("{} uses -> {} instances", uses.len(), instances.len());

    for name in ["ana", "ben"] {
        let seq = build_sequence(&instances, name, derive_seed(42, "arm", name));
        let order: Vec<String> = seq
            .entries
            .iter()
            .map(|e| {
                let p = &instances[e.instance].pair;
                let (a, b) = if e.swapped { (p.second(), p.first()) } else { (p.first(), p.second()) };
                format!("{a}{b}")
            })
            .collect();
        println!("{name}: {}", order.join(" "));
    }

    // a returning annotator resumes after the pairs already judged
    let mut seq = build_sequence(&instances, "ana", derive_seed(42, "arm", "ana"));
    let judged: HashSet<_> = seq.entries[..5].iter().map(|e| instances[e.instance].pair.clone()).collect();
    seq.resume(&instances, &judged);
    match next_instance(&seq, &instances) {
        Next::Instance(p) => println!("ana resumes at {}{}, position {} of {}", p.left, p.right, p.position, p.total),
        Next::Done => println!("ana is done"),
    }
    Ok(())
}
