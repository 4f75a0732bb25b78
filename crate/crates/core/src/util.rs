//! Small shared helpers: hashing, text normalization, deterministic parallel map.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of the given byte chunks, in order.
pub fn sha256_hex(chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for chunk in chunks {
        hasher.update(chunk);
        // Length-prefix framing so ("ab","c") and ("a","bc") hash differently.
        hasher.update((chunk.len() as u64).to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// First 8 bytes of SHA-256 as a u64, for seeding deterministic generators.
pub fn sha256_seed(chunks: &[&[u8]]) -> u64 {
    let hex = sha256_hex(chunks);
    u64::from_str_radix(&hex[..16], 16).unwrap()
}

/// Lowercase, trim, and collapse internal whitespace runs to single spaces.
pub fn normalize_ws_lower(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Normalization used when matching answers against the uninformative
/// pattern: trim, strip leading/trailing punctuation, collapse whitespace.
/// Case handling is left to the (case-insensitive) pattern itself.
pub fn strip_outer_punct(text: &str) -> String {
    let trimmed = text.trim();
    let stripped = trimmed
        .trim_start_matches(|c: char| c.is_ascii_punctuation())
        .trim_end_matches(|c: char| c.is_ascii_punctuation());
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Aggressive normalization for fuzzy question matching: lowercase, drop all
/// punctuation, collapse whitespace.
pub fn normalize_question(text: &str) -> String {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Split text into sentence-like units on terminal punctuation and newlines.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split(['\n', '.', '!', '?'])
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

/// Map `f` over `items` with up to `parallelism` worker threads, returning
/// results in input order. Output is identical regardless of thread count.
pub fn parallel_map<T, U, F>(items: Vec<T>, parallelism: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let parallelism = parallelism.max(1);
    if parallelism == 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let n = items.len();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<U>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(n) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let out = f(&items[idx]);
                slots_mutex.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    slots.into_iter().map(|slot| slot.unwrap()).collect()
}
