//! Brute-force reference implementations used to check the metrics.
//! Inputs are whitespace-separated lower-case tokens, so splitting on
//! spaces matches the library tokenizer.

pub fn rmse_mae(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (p, t) in pairs {
        sq += (p - t).powi(2);
        abs += (p - t).abs();
    }
    ((sq / n).sqrt(), abs / n)
}

/// DCG over the top `k` divided by the DCG of a ranking with the positive
/// first.
pub fn hr_ndcg(ranked: &[String], positive: &str, k: usize) -> (f64, f64) {
    let mut dcg = 0.0;
    let mut hit = 0.0;
    for i in 1..=k.min(ranked.len()) {
        let rel = if ranked[i - 1] == positive { 1.0 } else { 0.0 };
        dcg += rel / ((i + 1) as f64).log2();
        hit += rel;
    }
    let idcg = 1.0 / 2f64.log2();
    (hit, dcg / idcg)
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn grams<'a>(tokens: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn clipped(cand: &[Vec<&str>], refr: &[Vec<&str>]) -> usize {
    let mut seen: Vec<&Vec<&str>> = Vec::new();
    let mut total = 0;
    for g in cand {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        let in_cand = cand.iter().filter(|x| *x == g).count();
        let in_ref = refr.iter().filter(|x| *x == g).count();
        total += in_cand.min(in_ref);
    }
    total
}

/// Unsmoothed unigram precision; add-one precision `1/(total+1)` on
/// higher orders without matches; geometric mean; brevity penalty.
pub fn bleu(candidate: &str, reference: &str, n: usize) -> f64 {
    let c = words(candidate);
    let r = words(reference);
    if c.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for order in 1..=n {
        let cg = grams(&c, order);
        let m = clipped(&cg, &grams(&r, order));
        let p = if m > 0 {
            m as f64 / cg.len() as f64
        } else if order == 1 {
            return 0.0;
        } else {
            1.0 / (cg.len() as f64 + 1.0)
        };
        product *= p;
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * product.powf(1.0 / n as f64)
}

fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        return 0.0;
    }
    (1.0 + beta * beta) * p * r / (r + beta * beta * p)
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize, beta: f64) -> f64 {
    let cg = grams(&words(candidate), n);
    let rg = grams(&words(reference), n);
    if cg.is_empty() && rg.is_empty() {
        return if words(candidate) == words(reference) { 1.0 } else { 0.0 };
    }
    if cg.is_empty() || rg.is_empty() {
        return 0.0;
    }
    let m = clipped(&cg, &rg) as f64;
    f_beta(m / cg.len() as f64, m / rg.len() as f64, beta)
}

/// Plain recursion; only for short inputs.
pub fn lcs(a: &[&str], b: &[&str]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                1 + lcs(ra, rb)
            } else {
                lcs(ra, b).max(lcs(a, rb))
            }
        }
        _ => 0,
    }
}

pub fn rouge_l(candidate: &str, reference: &str, beta: f64) -> f64 {
    let c = words(candidate);
    let r = words(reference);
    if c.is_empty() {
        return 0.0;
    }
    let l = lcs(&c, &r) as f64;
    f_beta(l / c.len() as f64, l / r.len() as f64, beta)
}
