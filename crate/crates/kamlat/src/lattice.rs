//! Integer frequency vectors.

/// All k in Z^n with |k|_1 <= kmax, in lexicographic order.
pub fn l1_ball(n: usize, kmax: u32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; n];
    fill(&mut out, &mut cur, 0, kmax as i32);
    out
}

fn fill(out: &mut Vec<Vec<i32>>, cur: &mut Vec<i32>, pos: usize, left: i32) {
    if pos == cur.len() {
        out.push(cur.clone());
        return;
    }
    for v in -left..=left {
        cur[pos] = v;
        fill(out, cur, pos + 1, left - v.abs());
    }
    cur[pos] = 0;
}

/// Nonzero part of the l1 ball.
pub fn l1_ball_nonzero(n: usize, kmax: u32) -> Vec<Vec<i32>> {
    l1_ball(n, kmax)
        .into_iter()
        .filter(|k| k.iter().any(|&v| v != 0))
        .collect()
}

pub fn l1(k: &[i32]) -> u32 {
    k.iter().map(|v| v.unsigned_abs()).sum()
}

pub fn linf(k: &[i32]) -> u32 {
    k.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

pub fn dot(k: &[i32], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

pub fn neg(k: &[i32]) -> Vec<i32> {
    k.iter().map(|v| -v).collect()
}

pub fn add(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
