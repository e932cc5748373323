//! Regenerates the committed test corpus:
//!
//! ```text
//! cargo run -p hybridsum --example write_fixture > crates/core/tests/fixtures/synthetic_corpus.jsonl
//! ```

use hybridsum::corpus::write_records;
use hybridsum::synthetic::{generate, SyntheticConfig};

fn main() -> std::io::Result<()> {
    let cfg = SyntheticConfig { projects: 24, min_samples: 8, max_samples: 36, seed: 20, ..Default::default() };
    write_records(&generate(&cfg), std::io::stdout().lock())
}
