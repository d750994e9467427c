//! Prints a synthetic review dataset as JSONL.
//!
//! cargo run -p recmind-core --example synthetic_dataset -- Beauty 120 40 11 > beauty.jsonl

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let domain = args.first().map_or("Beauty", String::as_str);
    let num = |i: usize, default: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    println!(
        "{}",
        recmind_core::fixtures::synthetic_jsonl(domain, num(1, 120) as usize, num(2, 40) as usize, num(3, 11))
    );
}
