use std::time::Instant;

use episodic_explore::memory::{ArchDescriptor, AutoencoderModel, Frame, SequenceWindow};
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let frames: Vec<Frame> = (0..10)
        .map(|_| Frame::new(32, 32, (0..1024).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let w = SequenceWindow::new(frames, 0).unwrap();
    let mut m = AutoencoderModel::build(ArchDescriptor::default(), 1).unwrap();
    println!("params {}", m.param_count());
    let mut adam = m.new_optimizer(1e-4);
    let t = Instant::now();
    for _ in 0..5 {
        m.loss(&w).unwrap();
    }
    println!("forward {:?}", t.elapsed() / 5);
    let t = Instant::now();
    for _ in 0..5 {
        m.train_step(&w, &mut adam).unwrap();
    }
    println!("train step {:?}", t.elapsed() / 5);
}
