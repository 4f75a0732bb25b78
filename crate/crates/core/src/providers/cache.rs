//! Content-addressed response cache: files under
//! `cache_dir/<first two hex chars>/<hash>`, written atomically.

use std::fs;
use std::path::PathBuf;

use crate::error::Result;
use crate::util::sha256_hex;

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    /// 256-bit key over everything that determines a chat response.
    pub fn chat_key(
        model_name: &str,
        rendered_prompt: &str,
        temperature: f64,
        max_output_tokens: u32,
    ) -> String {
        sha256_hex(&[
            model_name.as_bytes(),
            rendered_prompt.as_bytes(),
            &temperature.to_bits().to_le_bytes(),
            &max_output_tokens.to_le_bytes(),
        ])
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(key)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        let path = self.path_for(key);
        fs::create_dir_all(path.parent().unwrap())?;
        // Unique temp name so concurrent writers never clobber each other's
        // partial writes; last rename wins with identical content.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, value)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// A cache rooted in a temp-style directory that is unique per process; used
/// when no cache_dir is configured.
pub fn ephemeral_cache_dir(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("nuggetbank-cache-{tag}-{}", std::process::id()))
}
