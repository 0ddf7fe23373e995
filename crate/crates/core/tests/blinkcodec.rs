use gazegan::blinkcodec::{binarize, frame_accuracy, reconstruction_loss, train_autoencoder, BlinkCodec, CodecConfig};
use gazegan::checkpoint::{Component, ModelCheckpoint};
use gazegan::dataio::WINDOW_LEN;
use gazegan::numerics::{Tape, Tensor};
use gazegan::synthetic::{blink_corpus, blink_train};
use gazegan::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weighted_decode(codec: &BlinkCodec, z: &[f64], w: &[f64]) -> f64 {
    codec.decode(z).unwrap().iter().zip(w).map(|(p, w)| p * w).sum()
}

#[test]
fn decoder_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..4 {
        let codec = BlinkCodec::new(5, 12, seed);
        let z: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let w: Vec<f64> = (0..WINDOW_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let dec = codec.bind_frozen_decoder(&mut tape);
        let zv = tape.leaf(&Tensor::from_vec(z.clone()).with_grad());
        let p = codec.decode_on_tape(&mut tape, &dec, zv).unwrap();
        let loss = tape.weighted_sum(p, &w).unwrap();
        tape.backward(loss).unwrap();
        let analytic = tape.grad(zv).unwrap().to_vec();

        let h = 1e-5;
        for i in 0..z.len() {
            let (mut up, mut dn) = (z.clone(), z.clone());
            up[i] += h;
            dn[i] -= h;
            let num = (weighted_decode(&codec, &up, &w) - weighted_decode(&codec, &dn, &w)) / (2.0 * h);
            let rel = (analytic[i] - num).abs() / analytic[i].abs().max(num.abs()).max(1e-6);
            assert!(rel < 1e-4, "seed {seed} coord {i}: {} vs {num}", analytic[i]);
        }
    }
}

#[test]
fn shapes_and_ranges() {
    let codec = BlinkCodec::new(7, 16, 3);
    assert_eq!((codec.latent_dim(), codec.hidden()), (7, 16));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let b = blink_train(&mut rng, WINDOW_LEN, 0.3);
    let z = codec.encode(&b).unwrap();
    assert_eq!(z.len(), 7);
    let p = codec.decode(&z).unwrap();
    assert_eq!(p.len(), WINDOW_LEN);
    assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
    assert!(codec.decode(&z[..6]).is_err());
    assert!(matches!(codec.encode(&b[..299]), Err(Error::Contract(_))));
}

#[test]
fn frozen_decoder_passes_gradient_to_latent() {
    let codec = BlinkCodec::new(4, 8, 0);
    let mut tape = Tape::new();
    let dec = codec.bind_frozen_decoder(&mut tape);
    let zv = tape.leaf(&Tensor::from_vec(vec![0.1, -0.2, 0.3, 0.0]).with_grad());
    let p = codec.decode_on_tape(&mut tape, &dec, zv).unwrap();
    let loss = tape.sum(p);
    tape.backward(loss).unwrap();
    assert!(tape.grad(zv).is_some());
}

#[test]
fn blink_corpus_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus = blink_corpus(&mut rng, 400);
    let mut onsets = 0usize;
    for b in &corpus {
        assert_eq!(b.len(), WINDOW_LEN);
        let mut k = 0;
        while k < b.len() {
            if b[k] == 1.0 {
                let start = k;
                while k < b.len() && b[k] == 1.0 {
                    k += 1;
                }
                onsets += 1;
                if k < b.len() {
                    assert!((3..=10).contains(&(k - start)), "run of {}", k - start);
                }
            } else {
                k += 1;
            }
        }
    }
    let rate = onsets as f64 / (corpus.len() as f64 * 5.0);
    assert!((0.2..0.4).contains(&rate), "blink rate {rate}");
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus = blink_corpus(&mut rng, 200);
    let cfg = CodecConfig { epochs: 6, latent_dim: 8, hidden: 32, ..CodecConfig::default() };
    let (a, curve) = train_autoencoder(&corpus, &cfg).unwrap();
    let (b, _) = train_autoencoder(&corpus, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(curve.len(), 6);
    assert!(curve.last().unwrap().loss < curve[0].loss);
    let untrained = BlinkCodec::new(8, 32, 0);
    assert!(reconstruction_loss(&a, &corpus).unwrap() < reconstruction_loss(&untrained, &corpus).unwrap());
    let acc = frame_accuracy(&a, &corpus).unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn training_input_errors() {
    assert!(matches!(train_autoencoder(&[], &CodecConfig::default()), Err(Error::Empty(_))));
    let mut bad = vec![0.0; WINDOW_LEN];
    bad[0] = 2.0;
    assert!(train_autoencoder(&[bad], &CodecConfig::default()).is_err());
    let zero_batch = CodecConfig { batch_size: 0, ..CodecConfig::default() };
    assert!(matches!(train_autoencoder(&[vec![0.0; WINDOW_LEN]], &zero_batch), Err(Error::Config(_))));
}

#[test]
fn binarize_examples() {
    assert_eq!(binarize(&[0.2, 0.8, 0.5], 0.5), vec![0.0, 1.0, 1.0]);
    assert_eq!(binarize(&[0.2, 0.8], 0.9), vec![0.0, 0.0]);
}

#[test]
fn checkpoint_round_trip() {
    let codec = BlinkCodec::new(6, 10, 9);
    let ck = ModelCheckpoint::new(Component::Codec, None, codec.params.clone());
    let back = ModelCheckpoint::from_bytes(&ck.to_bytes()).unwrap();
    let restored = BlinkCodec::from_params(back.params).unwrap();
    let z = [0.3, -0.1, 0.0, 0.7, -0.5, 0.2];
    assert_eq!(codec.decode(&z).unwrap(), restored.decode(&z).unwrap());
}

#[test]
fn trained_codec_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let corpus = blink_corpus(&mut rng, 1000);
    let cfg = CodecConfig { epochs: 30, ..CodecConfig::default() };
    let (codec, curve) = train_autoencoder(&corpus, &cfg).unwrap();

    // window-10 moving average of the training accuracy never drops
    let acc: Vec<f64> = curve.iter().map(|e| e.accuracy).collect();
    let smooth: Vec<f64> = acc.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    for pair in smooth.windows(2) {
        assert!(pair[1] >= pair[0], "smoothed accuracy fell: {smooth:?}");
    }

    let zeros = vec![0.0; WINDOW_LEN];
    assert_eq!(binarize(&codec.reconstruct(&zeros).unwrap(), 0.5), zeros);
    assert_eq!(codec.encode(&zeros).unwrap(), codec.encode(&zeros).unwrap());

    let b = &corpus[0];
    let mut flipped = b.clone();
    flipped[150] = 1.0 - flipped[150];
    assert_ne!(codec.encode(b).unwrap(), codec.encode(&flipped).unwrap());
}
