use gazegan::anim::{
    animate, blink_events, export_animation, eyelid_weight, eyelid_weights, format_animation, gaze_to_world,
    mean_pupil, parse_animation, pupil_scale, EyeRig, EyelidMap,
};
use gazegan::dataio::{GazeWindow, WINDOW_LEN};
use gazegan::synthetic::ToyCorpus;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn direction(p: [f64; 3], eye: [f64; 3]) -> [f64; 3] {
    let d = [p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

fn toy_window(seed: u64) -> GazeWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ToyCorpus::default().window(&mut rng, 1, "p").unwrap();
    for k in [10, 11, 12, 200] {
        w.frames[k][3] = 1.0;
    }
    w
}

#[test]
fn view_centre_and_corner() {
    let rig = EyeRig::default();
    assert_eq!(gaze_to_world(0.5, 0.5, &rig), [0.0, 0.0, 1.0]);
    let c = gaze_to_world(1.0, 1.0, &rig);
    assert!((c[0] - 0.5773503).abs() < 1e-7);
    assert!((c[1] - 0.4244748).abs() < 1e-7);
    assert_eq!(c[2], 1.0);
    // out-of-range gaze is clamped onto the view edge
    assert_eq!(gaze_to_world(1.7, -0.3, &rig), gaze_to_world(1.0, 0.0, &rig));
}

#[test]
fn eye_offset_translates_target() {
    let rig = EyeRig {
        eye_position: [0.1, -0.2, 0.3],
        ..EyeRig::default()
    };
    let t = gaze_to_world(0.5, 0.5, &rig);
    assert_eq!(t, [0.1, -0.2, 1.3]);
}

proptest! {
    #[test]
    fn direction_ignores_viewing_distance(x in 0.0f64..=1.0, y in 0.0f64..=1.0, d in 0.1f64..50.0) {
        let eye = [0.3, -0.1, 0.2];
        let near = EyeRig { eye_position: eye, ..EyeRig::default() };
        let far = EyeRig { eye_position: eye, viewing_distance: d, ..EyeRig::default() };
        let a = direction(gaze_to_world(x, y, &near), eye);
        let b = direction(gaze_to_world(x, y, &far), eye);
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn horizontal_mirror_symmetry(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let rig = EyeRig { eye_position: [0.4, 0.0, 0.0], ..EyeRig::default() };
        let a = gaze_to_world(x, y, &rig);
        let b = gaze_to_world(1.0 - x, y, &rig);
        prop_assert!((a[0] - 0.4 + b[0] - 0.4).abs() < 1e-12);
        prop_assert_eq!(a[1], b[1]);
        prop_assert_eq!(a[2], b[2]);
    }

    #[test]
    fn pupil_scale_is_monotone(a in 0.1f64..10.0, b in 0.1f64..10.0, base in 0.5f64..5.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(pupil_scale(lo, base).unwrap() <= pupil_scale(hi, base).unwrap());
    }
}

#[test]
fn direction_invariance_at_seven() {
    let near = gaze_to_world(0.8, 0.3, &EyeRig::default());
    let far = gaze_to_world(0.8, 0.3, &EyeRig { viewing_distance: 7.0, ..EyeRig::default() });
    let (a, b) = (direction(near, [0.0; 3]), direction(far, [0.0; 3]));
    for i in 0..3 {
        assert!((a[i] - b[i]).abs() < 1e-12);
    }
}

#[test]
fn invalid_rig_is_rejected() {
    for rig in [
        EyeRig { viewing_distance: 0.0, ..EyeRig::default() },
        EyeRig { h_fov: 180.0, ..EyeRig::default() },
        EyeRig { v_fov: 0.0, ..EyeRig::default() },
    ] {
        assert!(rig.validate().is_err());
        assert!(animate(&toy_window(0), &rig, &EyelidMap::default(), 3.0).is_err());
    }
}

#[test]
fn eyelid_examples() {
    let map = EyelidMap::default();
    assert_eq!(eyelid_weight(1.0, false, &map), 0.0);
    assert_eq!(eyelid_weight(0.0, false, &map), 1.0);
    assert_eq!(eyelid_weight(0.7, true, &map), 1.0);
    let steep = EyelidMap { slope: -2.0, intercept: 1.5 };
    assert_eq!(eyelid_weight(0.5, false, &steep), 0.5);
    assert_eq!(eyelid_weight(0.0, false, &steep), 1.0);
    assert_eq!(eyelid_weights(&[0.25, 0.25], &[0.0, 1.0], &map).unwrap(), vec![0.75, 1.0]);
    assert!(eyelid_weights(&[0.0], &[], &map).is_err());
}

#[test]
fn pupil_examples() {
    assert_eq!(pupil_scale(3.2, 3.2).unwrap(), 1.0);
    assert_eq!(pupil_scale(4.0, 2.0).unwrap(), 2.0);
    assert!(pupil_scale(0.0, 2.0).is_err());
    assert!(pupil_scale(3.0, -1.0).is_err());
    let w = toy_window(0);
    let m = mean_pupil(std::slice::from_ref(&w)).unwrap();
    assert!((m - 3.5).abs() < 0.1);
}

#[test]
fn blink_event_examples() {
    let mut b = vec![0.0; WINDOW_LEN];
    b[2] = 1.0;
    b[3] = 1.0;
    assert_eq!(blink_events(&b).unwrap(), vec![(2, 2)]);
    assert_eq!(blink_events(&[0.0; WINDOW_LEN]).unwrap(), vec![]);
    assert_eq!(blink_events(&[1.0; WINDOW_LEN]).unwrap(), vec![(0, WINDOW_LEN)]);
    assert_eq!(blink_events(&[1.0, 0.0, 1.0, 1.0]).unwrap(), vec![(0, 1), (2, 2)]);
    assert!(blink_events(&[0.5]).is_err());
}

#[test]
fn export_writes_one_record_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anim.txt");
    let w = toy_window(3);
    let rig = EyeRig::default();
    let frames = export_animation(&w, &rig, &EyelidMap::default(), 3.5, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), WINDOW_LEN);
    assert!(text.ends_with('\n'));
    for (k, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0].parse::<f64>().unwrap(), k as f64 / 60.0);
    }
    let parsed = parse_animation(&text).unwrap();
    assert_eq!(parsed, frames);
    assert_eq!(parsed[11].blink, 1);
    assert_eq!(parsed[11].eyelid_weight, 1.0);
    assert_eq!(parsed[50].blink, 0);

    let again = dir.path().join("again.txt");
    export_animation(&w, &rig, &EyelidMap::default(), 3.5, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    assert_eq!(format_animation(&frames), text);
}

#[test]
fn parse_rejects_malformed_records() {
    assert!(parse_animation("1 2 3").is_err());
    assert!(parse_animation("0 0 0 1 0 1 2\n").is_err());
    assert!(parse_animation("0 0 0 x 0 1 0\n").is_err());
}

#[test]
fn export_to_missing_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no/such/dir/anim.txt");
    let w = toy_window(1);
    assert!(export_animation(&w, &EyeRig::default(), &EyelidMap::default(), 3.5, &path).is_err());
}
