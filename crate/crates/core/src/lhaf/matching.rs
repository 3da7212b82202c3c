use super::PairMatching;

/// Greedy pairing of repeated photons into repeated pairs.
///
/// Counts are kept in a list re-sorted by descending count each round. The
/// sort is stable and the list starts in mode order, so initial ties go to
/// the lower mode index. While at least two photons remain, let `n1 >= n2`
/// be the two largest counts on modes `m1, m2`: if `n1 >= 2 n2` mode `m1` is
/// paired with itself `⌊n1/2⌋` times, otherwise `(m1, m2)` is paired `n2`
/// times. A single photon left at the end becomes the odd loop.
pub fn matched_reps(pattern: &[usize]) -> PairMatching {
    let mut counts: Vec<(usize, usize)> = pattern.iter().enumerate().map(|(m, &n)| (n, m)).collect();
    let mut pairs = Vec::new();
    let mut reps = Vec::new();
    let mut odd = None;
    loop {
        counts.sort_by(|a, b| b.0.cmp(&a.0));
        let (n1, m1) = counts.first().copied().unwrap_or((0, 0));
        if n1 == 0 {
            break;
        }
        let (n2, m2) = counts.get(1).copied().unwrap_or((0, 0));
        if n1 == 1 && n2 == 0 {
            odd = Some(m1);
            counts[0].0 = 0;
            break;
        }
        if n1 >= 2 * n2 {
            let r = n1 / 2;
            pairs.push((m1, m1));
            reps.push(r);
            counts[0].0 -= 2 * r;
        } else {
            pairs.push((m1, m2));
            reps.push(n2);
            counts[0].0 -= n2;
            counts[1].0 -= n2;
        }
    }
    PairMatching { pairs, reps, odd }
}
