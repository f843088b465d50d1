use asl_web::DemoState;

#[test]
fn demo_trains_and_refuses_at_any_beta() {
    let demo = DemoState::train(1, 30).unwrap();
    assert_eq!(demo.curve.len(), 30);
    let last = demo.curve.last().unwrap();
    assert!(last.l_cls < demo.curve[0].l_cls);

    let at = |beta| demo.view(0, beta, "asl").unwrap();
    let (s_only, a_only) = (at(0.0), at(1.0));
    assert_eq!(s_only.fused, s_only.cas);
    assert_eq!(a_only.fused, a_only.actionness);
    assert!(!at(demo.model.beta).gt.is_empty());
    assert!((0.0..=1.0).contains(&at(0.5).test_map));
}

#[test]
fn demo_is_deterministic_and_rejects_bad_requests() {
    let a = DemoState::train(4, 5).unwrap();
    let b = DemoState::train(4, 5).unwrap();
    assert_eq!(a.model, b.model);
    assert!(a.view(a.test.len(), 0.5, "asl").is_err());
    assert!(a.view(0, 1.5, "asl").is_err());
    assert!(a.view(0, 0.5, "cas").is_err());
    for mode in ["asl", "asl-s", "asl-a"] {
        assert!(a.view(0, 0.5, mode).is_ok());
    }
}
