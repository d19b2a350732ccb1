use std::time::Instant;
use ultrametric::ensemble::sample_goe;
use ultrametric::rng::substream;
use ultrametric::spectral::eig_sym;

fn main() {
    for &(dim, vecs) in &[(1024usize, false), (2048, false), (2048, true), (4096, false), (4096, true)] {
        let mut rng = substream(1, &[dim as u64]);
        let m = sample_goe(dim, &mut rng);
        let t0 = Instant::now();
        let d = eig_sym(&m, vecs).unwrap();
        println!("dim={dim} vectors={vecs}: {:.2?} (lambda_max={:.4})", t0.elapsed(), d.eigenvalues[dim-1]);
    }
}
