//! Parse a game in the text format and print it back as text and JSON.

use enpar::{parse_game, to_json, to_text};

fn main() {
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).expect("valid game");
    println!("{} states, {} edges, max |reward| {}", g.num_states(), g.num_edges(), g.max_abs_reward());
    print!("{}", to_text(&g));
    println!("{}", to_json(&g));
}
