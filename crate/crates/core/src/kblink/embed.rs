use thiserror::Error;

#[derive(Debug, Error)]
#[error("embedding failed: {0}")]
pub struct EmbedError(pub String);

/// Text encoder producing fixed-dimension vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Embed `text`; blank text maps to the zero vector without calling the provider.
pub fn embed(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>, EmbedError> {
    if text.trim().is_empty() {
        return Ok(vec![0.0; provider.dim()]);
    }
    let v = provider.embed(text)?;
    if v.len() != provider.dim() {
        return Err(EmbedError(format!(
            "expected dimension {}, got {}",
            provider.dim(),
            v.len()
        )));
    }
    Ok(v)
}

/// Cosine similarity, `None` if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Offline baseline: L2-normalized term frequencies of lowercased word tokens,
/// hashed (FNV-1a) into a fixed number of buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfWords {
    dim: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self { dim: 4096 }
    }
}

impl HashedBagOfWords {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl EmbeddingProvider for HashedBagOfWords {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        let lowered = text.to_lowercase();
        for tok in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[(fnv1a(tok.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_examples() {
        let p = HashedBagOfWords::default();
        let a = embed(&p, "Dutch glass artist").unwrap();
        let b = embed(&p, "dutch  GLASS artist").unwrap();
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = embed(&p, "English footballer").unwrap();
        assert_eq!(cosine(&a, &c), Some(0.0));
        let z = embed(&p, "").unwrap();
        assert_eq!(z.len(), 4096);
        assert!(z.iter().all(|x| *x == 0.0));
        assert_eq!(cosine(&a, &z), None);
        assert_eq!(embed(&p, "glass").unwrap(), embed(&p, "glass").unwrap());
    }

    struct WrongDim;
    impl EmbeddingProvider for WrongDim {
        fn dim(&self) -> usize {
            3
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, EmbedError> {
            Ok(vec![1.0])
        }
    }

    #[test]
    fn dimension_checked() {
        assert!(embed(&WrongDim, "x").is_err());
        assert_eq!(embed(&WrongDim, " ").unwrap(), vec![0.0; 3]);
    }
}
