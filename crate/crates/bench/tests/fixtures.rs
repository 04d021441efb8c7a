use waveqed_bench::{generic, transparency_sweep};

#[test]
fn fixtures_are_valid() {
    let sweep = transparency_sweep();
    assert_eq!(sweep.len(), 3);
    for (_, p) in sweep.iter().chain([("generic".to_string(), generic())].iter()) {
        assert!(p.validate().is_ok());
        assert!(waveqed::VertexContext::new(0.3, p).is_ok());
    }
}
