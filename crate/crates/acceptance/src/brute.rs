//! Exhaustive search over discretized designs under an exact volume budget.

/// Calls `visit` with every vector of `n` levels in `0..levels` whose sum is
/// `total`. Levels are assigned left to right with the remaining budget
/// pruned against what the tail can still absorb.
pub fn for_each_composition(n: usize, levels: usize, total: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(v: &mut Vec<usize>, n: usize, top: usize, left: usize, visit: &mut dyn FnMut(&[usize])) {
        let i = v.len();
        if i == n {
            if left == 0 {
                visit(v);
            }
            return;
        }
        let rest = n - i - 1;
        let lo = left.saturating_sub(rest * top);
        let hi = top.min(left);
        for k in lo..=hi {
            v.push(k);
            rec(v, n, top, left - k, visit);
            v.pop();
        }
    }
    if levels == 0 || total > n * (levels - 1) {
        return;
    }
    rec(&mut Vec::with_capacity(n), n, levels - 1, total, &mut visit);
}

/// Binomial coefficient, for checking enumeration counts.
pub fn choose(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
