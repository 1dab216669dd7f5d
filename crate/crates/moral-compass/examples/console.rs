//! The interactive console, wired to your terminal. Identical to
//! running the `moral-compass` binary with no flags.
//!
//!     cargo run --example console
//!
//! Try: `should i learn rust?`, `/feedback agree`, `/train`, `/stats`,
//! `/quit`.

use moral_compass::gateway::{repl, Config};

fn main() -> moral_compass::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut config = Config::default();
    config.storage_dir = dir.path().join("data");
    config.bank_path = dir.path().join("bank.txt");
    std::fs::write(
        &config.bank_path,
        "should i read more books?\nis it okay to stay up late?\n",
    )?;
    repl::run_with_stdio(&config)
}
