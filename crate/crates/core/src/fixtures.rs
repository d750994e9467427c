//! Small deterministic datasets for tests, demos and the README walkthrough.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Three Beauty items and five interactions. "Sewak Al-Falah" is rated 4
/// and 5, so its average rating is 4.5.
pub fn sewak_jsonl() -> String {
    [
        json!({"type": "item", "item_id": "B001", "title": "Sewak Al-Falah", "brand": "Al-Falah",
               "price": 3.49, "category": "Beauty > Oral Care",
               "description": "Natural miswak chewing stick."}),
        json!({"type": "item", "item_id": "B002", "title": "Rose Water Toner", "brand": "Petal",
               "price": 12.0, "category": "Beauty > Skin Care"}),
        json!({"type": "item", "item_id": "B003", "title": "Argan Oil Shampoo", "brand": "Maroc",
               "price": 9.5, "category": "Beauty > Hair Care"}),
        json!({"type": "interaction", "user_id": "U1", "item_id": "B001", "rating": 4,
               "review_text": "Works well and tastes fresh.", "review_title": "Good miswak", "timestamp": 100}),
        json!({"type": "interaction", "user_id": "U2", "item_id": "B001", "rating": 5,
               "review_text": "Durable and a good price.", "review_title": "Five Stars", "timestamp": 110}),
        json!({"type": "interaction", "user_id": "U1", "item_id": "B002", "rating": 3,
               "review_text": "Smells nice, dries skin.", "review_title": "Okay toner", "timestamp": 120}),
        json!({"type": "interaction", "user_id": "U2", "item_id": "B003", "rating": 4,
               "review_text": "Soft hair after a week.", "review_title": "Nice shampoo", "timestamp": 130}),
        json!({"type": "interaction", "user_id": "U3", "item_id": "B002", "rating": 5,
               "review_text": "My favourite toner.", "review_title": "Love it", "timestamp": 140}),
    ]
    .iter()
    .map(|v| v.to_string())
    .collect::<Vec<_>>()
    .join("\n")
}

const ADJECTIVES: [&str; 12] = [
    "Gentle", "Radiant", "Classic", "Herbal", "Silky", "Fresh", "Velvet", "Pure", "Bright",
    "Daily", "Deep", "Soft",
];
const NOUNS: [&str; 10] = [
    "Cleanser", "Serum", "Lotion", "Shampoo", "Toner", "Balm", "Mask", "Scrub", "Mist", "Cream",
];
const REVIEWS: [&str; 6] = [
    "Durable and has a good price.",
    "Smells great and lasts all day.",
    "Did not work for my skin type.",
    "Arrived quickly, would buy again.",
    "Too greasy for daily use.",
    "My go-to product for years.",
];
const TITLES: [&str; 6] = ["Five Stars", "Great value", "Not for me", "Four Stars", "Love it", "Solid pick"];

/// A synthetic review dataset: `n_items` items and `n_users` users with
/// 4 to 9 distinct interactions each. Item ids are `<domain>-<index>`.
pub fn synthetic_jsonl(domain: &str, n_items: usize, n_users: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(n_items + n_users * 9);
    for i in 0..n_items {
        let title = format!(
            "{} {} {} No. {i}",
            domain,
            ADJECTIVES[i % ADJECTIVES.len()],
            NOUNS[(i / ADJECTIVES.len()) % NOUNS.len()]
        );
        lines.push(json!({
            "type": "item",
            "item_id": format!("{domain}-{i:04}"),
            "title": title,
            "brand": format!("Brand{}", i % 7),
            "price": 5.0 + (i % 20) as f64,
            "category": format!("{domain} > {}", NOUNS[(i / ADJECTIVES.len()) % NOUNS.len()]),
        }));
    }
    let all: Vec<usize> = (0..n_items).collect();
    for u in 0..n_users {
        let count = rng.random_range(4..=9).min(n_items);
        let picks: Vec<&usize> = all.choose_multiple(&mut rng, count).collect();
        for (step, &&item) in picks.iter().enumerate() {
            let review = REVIEWS.choose(&mut rng).unwrap();
            let title = TITLES.choose(&mut rng).unwrap();
            lines.push(json!({
                "type": "interaction",
                "user_id": format!("{domain}-U{u:03}"),
                "item_id": format!("{domain}-{item:04}"),
                "rating": rng.random_range(1..=5),
                "review_text": review,
                "review_title": title,
                "timestamp": 1_600_000_000 + (u * 100 + step) as i64 * 3600,
            }));
        }
    }
    lines.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
}
