//! Decode a wire-format plan into motion primitives and print the full
//! heading-transition table.
//!
//! cargo run --example decode_path -- '{"array":["1","2","2","3"]}' [initial-heading-code]

use gridpilot::pathcodec::{decode_moves, decode_wire, encode_wire, transition_moves};
use gridpilot::Action;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let wire = args.next().unwrap_or_else(|| r#"{"array":["1","2","2","3"]}"#.to_string());
    let heading = match args.next() {
        Some(code) => Action::from_code(code.parse()?).ok_or("heading must be 0..=3")?,
        None => Action::Up,
    };

    let plan = decode_wire(wire.as_bytes())?;
    println!("plan      {plan}");
    println!("re-encode {}", String::from_utf8(encode_wire(&plan))?);
    let moves = decode_moves(&plan, heading);
    let names: Vec<String> = moves.iter().map(|m| m.to_string()).collect();
    println!("moves from {heading}: {}", names.join(" "));

    println!();
    println!("{:<6} {:<6} primitives", "prev", "next");
    for prev in Action::ALL {
        for next in Action::ALL {
            let seq: Vec<String> = transition_moves(prev, next).iter().map(|m| m.to_string()).collect();
            println!("{:<6} {:<6} {}", prev.name(), next.name(), seq.join(" "));
        }
    }
    Ok(())
}
