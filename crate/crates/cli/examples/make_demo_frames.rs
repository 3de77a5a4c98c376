//! Generate a synthetic exemplar clip (two opposing streams of textured
//! disks) for trying the pipeline without real footage.
//!
//! Usage: cargo run -p crowdsynth-cli --example make_demo_frames -- <dir>

use crowdsynth_core::pipeline::two_stream_fixture;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "demo_frames".into());
    let seq = two_stream_fixture(200, 200, 100, 8, 2.0);
    seq.save_dir(std::path::Path::new(&dir), false)
        .expect("writing frames failed");
    println!("wrote {} frames to {dir}", seq.len());
}
