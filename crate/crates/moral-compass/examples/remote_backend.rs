//! Point the embedder at a remote encoder service instead of the
//! built-in hash backend. The service must answer
//! `POST {endpoint}/embed` with `{"dim": N, "vectors": [[...]]}` and
//! `GET {endpoint}/healthz` with any 2xx.
//!
//!     cargo run --example remote_backend -- http://127.0.0.1:8900
//!
//! Without a running encoder this prints the failure handling instead:
//! startup probes refuse to proceed and the error carries exit code 2.

use moral_compass::{cosine, probe_health, Embedder, TextEmbedder};

fn main() {
    let endpoint = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "http://127.0.0.1:8900".to_string());
    println!("encoder endpoint: {endpoint}");

    match probe_health(&endpoint) {
        Ok(()) => println!("health probe: ok"),
        Err(e) => {
            println!("health probe failed: {e}");
            println!("(a server would refuse to start: exit code {})", e.exit_code());
            println!("start an encoder sidecar there and rerun, e.g. one that");
            println!("answers POST /embed with {{\"dim\": N, \"vectors\": [[...]]}}");
            return;
        }
    }

    // Second argument to `remote` is the LRU cache capacity.
    let embedder = Embedder::remote(&endpoint, 1_000).expect("endpoint accepted");
    println!("dimension before first call: {:?}", embedder.dim());

    let texts = ["should i trust the network?", "yes, you should trust the network."];
    match embedder.embed_batch(&texts) {
        Ok(vectors) => {
            println!("dimension learned from the service: {:?}", embedder.dim());
            let sim = cosine(&vectors[0], &vectors[1]).expect("same dimension");
            println!("cosine({:?}, {:?}) = {sim:+.4}", texts[0], texts[1]);

            // Repeat lookups are served from the cache, not the wire.
            let again = embedder.embed(texts[0]).expect("cached");
            assert_eq!(&vectors[0], &again);
            println!("repeat lookup came from the cache (bit-identical).");
        }
        Err(e) => {
            println!("embed failed: {e}");
            println!("exit code for this failure class: {}", e.exit_code());
        }
    }
}
