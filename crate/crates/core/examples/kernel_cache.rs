//! Building projected kernels through the on-disk cache. The second lookup
//! reads the stored tables instead of recomputing the quadratures.
//!
//!     ARRAYCAV_CACHE_DIR=/tmp/arraycav cargo run --release --example kernel_cache

use arraycav::cache::KernelCache;
use arraycav::config::Config;
use arraycav::confined::projected_kernel_for;
use std::time::Instant;

fn main() -> arraycav::Result<()> {
    let cache = KernelCache::from_env().unwrap_or_else(|| KernelCache::new(std::env::temp_dir().join("arraycav-example-cache")));
    println!("cache: {}", cache.dir().display());
    let cfg = Config::default();
    for pass in 1..=2 {
        let start = Instant::now();
        let (kernel, records) = projected_kernel_for(&cfg, true, Some(&cache))?;
        println!("pass {pass}: {:.1} ms, projected d2z hash {}", start.elapsed().as_secs_f64() * 1e3, &kernel.content_hash()[..16]);
        for r in records {
            let (key, hit) = r.cache.unwrap();
            println!("  {:<9} {} {}", r.kind, &key[..16], if hit { "hit" } else { "built" });
        }
    }
    Ok(())
}
