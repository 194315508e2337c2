/// Number of maximal whitespace-separated tokens in `text`.
///
/// Punctuation stays attached to its token, so `"laws, really"` is two words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
