//! Degree-2 expansion of binary pixel vectors.
//!
//! For `P` raw pixels the expanded space has `P(P-1)/2 + P + 1` slots, laid
//! out as:
//!
//! * index `0`: bias, active at every position,
//! * indices `1 ..= P`: singleton `p` at `1 + p`, active when pixel `p` is on,
//! * pair block after the singletons, row-major over `p < q`: pair `(p, q)`
//!   sits at `pair_feature_index(p, q, P)` and is active only when both
//!   pixels are on.
//!
//! The layout is fixed so that model coordinates stay stable across runs.

/// Total number of expanded features for `p` raw pixels, bias included.
pub fn degree2_feature_count(p: usize) -> usize {
    p * (p - 1) / 2 + p + 1
}

/// Index of the pair feature `(p, q)` with `p < q` in the expanded layout.
pub fn pair_feature_index(p: usize, q: usize, num_pixels: usize) -> usize {
    debug_assert!(p < q && q < num_pixels);
    let base = 1 + num_pixels;
    let before_p = p * (num_pixels - 1) - p * (p - 1) / 2;
    base + before_p + (q - p - 1)
}

/// Expands a binary pixel vector into the indices of its active degree-2
/// features (all expanded features are binary, value 1).
pub fn expand_degree2_features(pixels: &[bool]) -> Vec<u32> {
    let p_total = pixels.len();
    let on: Vec<usize> = (0..p_total).filter(|&p| pixels[p]).collect();
    let mut active = Vec::with_capacity(1 + on.len() + on.len() * on.len() / 2);
    active.push(0u32);
    for &p in &on {
        active.push((1 + p) as u32);
    }
    for (a, &p) in on.iter().enumerate() {
        for &q in &on[a + 1..] {
            active.push(pair_feature_index(p, q, p_total) as u32);
        }
    }
    active.sort_unstable();
    active
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_pixels_give_only_bias() {
        let pixels = vec![false; 128];
        assert_eq!(expand_degree2_features(&pixels), vec![0]);
        assert_eq!(degree2_feature_count(128), 8257);
    }

    #[test]
    fn single_pixel_has_no_pair_features() {
        let mut pixels = vec![false; 8];
        pixels[3] = true;
        assert_eq!(expand_degree2_features(&pixels), vec![0, 4]);
    }

    #[test]
    fn two_pixels_activate_their_pair() {
        let mut pixels = vec![false; 8];
        pixels[0] = true;
        pixels[5] = true;
        let expected_pair = pair_feature_index(0, 5, 8) as u32;
        assert_eq!(
            expand_degree2_features(&pixels),
            vec![0, 1, 6, expected_pair]
        );
    }

    #[test]
    fn pair_layout_is_dense_and_row_major() {
        let p = 6;
        let mut seen = Vec::new();
        for a in 0..p {
            for b in a + 1..p {
                seen.push(pair_feature_index(a, b, p));
            }
        }
        let base = 1 + p;
        let expected: Vec<usize> = (base..base + p * (p - 1) / 2).collect();
        assert_eq!(seen, expected);
        assert_eq!(base + p * (p - 1) / 2, degree2_feature_count(p));
    }
}
