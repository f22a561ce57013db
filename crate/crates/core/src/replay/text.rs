//! Case- and punctuation-insensitive fuzzy text similarity.

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_text(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// `1 - levenshtein / max(len)`, 1 for two empty strings.
pub fn ratio(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / n as f64
}

fn token_sorted(s: &str) -> String {
    let mut words: Vec<&str> = s.split_whitespace().collect();
    words.sort_unstable();
    words.join(" ")
}

/// Max of the plain and token-sorted ratios of the normalized strings.
pub fn fuzzy_text_score(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize_text(a), normalize_text(b));
    ratio(&a, &b).max(ratio(&token_sorted(&a), &token_sorted(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook dynamic-programming edit distance.
    fn edit_distance(a: &str, b: &str) -> usize {
        let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn examples() {
        assert_eq!(fuzzy_text_score("Sign In", "sign in!"), 1.0);
        assert!((fuzzy_text_score("History", "Histry") - (1.0 - 1.0 / 7.0)).abs() < 1e-9);
        assert!((fuzzy_text_score("History", "Histry") - 0.857143).abs() < 1e-6);
        assert_eq!(fuzzy_text_score("New York London", "London New York"), 1.0);
    }

    #[test]
    fn matches_oracle_edit_distance() {
        let words = ["kitten", "sitting", "saturday", "sunday", "", "a", "history", "mystery", "flaw", "lawn"];
        for a in words {
            for b in words {
                let n = a.len().max(b.len());
                let want = if n == 0 { 1.0 } else { 1.0 - edit_distance(a, b) as f64 / n as f64 };
                assert!((ratio(a, b) - want).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  Hello,   World!! "), "hello world");
        assert_eq!(normalize_text("Hamish & Andy"), "hamish andy");
    }
}
