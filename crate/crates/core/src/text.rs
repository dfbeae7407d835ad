//! Small string utilities: edit distance and signed trigram hashing.

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        curr[0] = i;
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            curr[j] = (prev[j] + 1).min(curr[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bucket and sign for one feature under signed hashing.
pub fn hash_bucket(feature: &str, dims: usize) -> (usize, f64) {
    let h = fnv1a(feature.as_bytes());
    let bucket = (h % dims as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Signed feature hashing of lowercase character trigrams, L2-normalized.
/// Inputs with fewer than three characters hash to the zero vector.
pub fn trigram_vector(text: &str, dims: usize) -> Vec<f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut v = vec![0.0; dims];
    for w in chars.windows(3) {
        let tri: String = w.iter().collect();
        let (bucket, sign) = hash_bucket(&tri, dims);
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_distance() {
        assert_eq!(levenshtein("cst", "cost"), 1);
        assert_eq!(levenshtein("cst", "cast"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("héllo", "hello"), 1);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn short_text_is_zero() {
        assert!(trigram_vector("ab", 256).iter().all(|&x| x == 0.0));
        let v = trigram_vector("abc", 256);
        assert!((dot(&v, &v) - 1.0).abs() < 1e-12);
    }
}
