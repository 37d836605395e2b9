use std::collections::BTreeSet;

use digestrace_core::digest::{
    generic_mhp, Digest, Elem, JoinElem, MhpVerdict, OnceElem, PredicateMode, ThreadFlag as F,
    TidElem,
};
use digestrace_core::digests::{
    digest_by_name, product_by_names, Join, Lockset, Once, ThreadFlag, ThreadId,
};
use digestrace_core::program::{Action, CreateId, GlobalId, MutexId, OnceId, ProtoId};
use digestrace_core::ConfigError;

const G: GlobalId = GlobalId(0);
const A: MutexId = MutexId(0);
const M_G: MutexId = MutexId(1);
const O: OnceId = OnceId(0);

fn locks(ms: &[u32]) -> Elem {
    Elem::Lockset(ms.iter().map(|&m| MutexId(m)).collect())
}

fn create(site: u32) -> Action {
    Action::Create {
        proto: ProtoId(1),
        site: CreateId(site),
    }
}

fn tid(path: &[u32], unique: bool, created: &[u32]) -> TidElem {
    TidElem {
        path: path.iter().map(|&c| CreateId(c)).collect(),
        unique,
        created: created.iter().map(|&c| CreateId(c)).collect(),
    }
}

fn once(active: &[u32], completed: &[u32]) -> Elem {
    Elem::Once(OnceElem {
        active: active.iter().map(|&o| OnceId(o)).collect(),
        completed: completed.iter().map(|&o| OnceId(o)).collect(),
    })
}

#[test]
fn lockset_transfer_functions() {
    let d = Lockset;
    assert_eq!(d.init(), vec![locks(&[])]);
    assert_eq!(d.new_thread(&locks(&[0]), &create(0)), Some(locks(&[])));
    assert_eq!(d.step_observing(&Action::Lock(A), &locks(&[]), &locks(&[1])), Some(locks(&[0])));
    assert_eq!(d.step_observing(&Action::Lock(A), &locks(&[0]), &locks(&[])), None);
    assert_eq!(d.step_local(&Action::Unlock(A), &locks(&[0, 1])), Some(locks(&[1])));
    assert_eq!(d.step_local(&Action::Unlock(A), &locks(&[1])), None);
    assert_eq!(d.step_local(&Action::Skip, &locks(&[1])), Some(locks(&[1])));
}

#[test]
fn lockset_bespoke_excludes_common_mutex_but_generic_does_not() {
    let d = Lockset;
    let a = locks(&[0]);
    assert_eq!(d.mhp(G, &a, &a), MhpVerdict::False);
    assert_eq!(d.mhp(G, &a, &locks(&[])), MhpVerdict::Top);
    // lock(m_g)({a},{a}) = {{a, m_g}}, so the generic predicate answers top.
    assert_eq!(d.step_observing(&Action::Lock(M_G), &a, &a), Some(locks(&[0, 1])));
    assert_eq!(generic_mhp(&d, M_G, &a, &a), MhpVerdict::Top);
}

#[test]
fn thread_flag_transfer_functions() {
    let d = ThreadFlag;
    let (st, mtm, mt) = (Elem::Flag(F::StMain), Elem::Flag(F::MtMain), Elem::Flag(F::Mt));
    assert_eq!(d.init(), vec![st.clone()]);
    assert_eq!(d.new_thread(&st, &create(0)), Some(mt.clone()));
    assert_eq!(d.step_local(&create(0), &st), Some(mtm.clone()));
    assert_eq!(d.step_local(&create(0), &mtm), Some(mtm.clone()));
    assert_eq!(d.step_local(&create(0), &mt), Some(mt.clone()));
    let lock = Action::Lock(A);
    assert_eq!(d.step_observing(&lock, &st, &mt), None);
    assert_eq!(d.step_observing(&lock, &st, &mtm), None);
    assert_eq!(d.step_observing(&lock, &st, &st), Some(st.clone()));
    // The last unlock may predate the first create.
    assert_eq!(d.step_observing(&lock, &mtm, &st), Some(mtm.clone()));
    assert_eq!(d.step_observing(&lock, &mt, &st), Some(mt.clone()));
}

#[test]
fn thread_flag_predicates() {
    let d = ThreadFlag;
    let (st, mtm, mt) = (Elem::Flag(F::StMain), Elem::Flag(F::MtMain), Elem::Flag(F::Mt));
    let table = [
        (&st, &st, MhpVerdict::False),
        (&st, &mt, MhpVerdict::False),
        (&mtm, &mtm, MhpVerdict::False),
        (&mtm, &mt, MhpVerdict::Top),
        (&mt, &mt, MhpVerdict::Top),
    ];
    for (a, b, v) in table {
        assert_eq!(d.mhp(G, a, b), v, "{a} vs {b}");
        assert_eq!(d.mhp(G, b, a), v, "{b} vs {a}");
    }
    // Generic: lock(m_g)(ST_main, MT) is empty, lock(m_g)(MT, ST_main) is not.
    assert_eq!(generic_mhp(&d, M_G, &st, &mt), MhpVerdict::False);
    assert_eq!(generic_mhp(&d, M_G, &mtm, &mtm), MhpVerdict::Top);
}

#[test]
fn thread_ids_track_uniqueness() {
    let d = ThreadId::default();
    let root = Elem::Tid(tid(&[], true, &[]));
    assert_eq!(d.init(), vec![root.clone()]);
    let first = d.new_thread(&root, &create(0)).unwrap();
    assert_eq!(first, Elem::Tid(tid(&[0], true, &[])));
    let after = d.step_local(&create(0), &root).unwrap();
    assert_eq!(after, Elem::Tid(tid(&[], true, &[0])));
    // A second create from the same site is no longer unique.
    assert_eq!(d.new_thread(&after, &create(0)), Some(Elem::Tid(tid(&[0], false, &[]))));
    // A site repeated along the path is not unique either.
    let nested = Elem::Tid(tid(&[0], true, &[]));
    assert_eq!(d.new_thread(&nested, &create(0)), Some(Elem::Tid(tid(&[0, 0], false, &[]))));
}

#[test]
fn thread_id_paths_are_capped() {
    let d = ThreadId { cap: 2 };
    let full = Elem::Tid(tid(&[0, 1], true, &[]));
    assert_eq!(d.new_thread(&full, &create(2)), Some(Elem::Tid(tid(&[0, 1], false, &[]))));
}

#[test]
fn thread_id_predicate() {
    let d = ThreadId::default();
    let t = |p: &[u32], u, c: &[u32]| Elem::Tid(tid(p, u, c));
    // Same unique thread.
    assert_eq!(d.mhp(G, &t(&[0], true, &[]), &t(&[0], true, &[])), MhpVerdict::False);
    // Same path, not unique: two instances.
    assert_eq!(d.mhp(G, &t(&[0], false, &[]), &t(&[0], false, &[])), MhpVerdict::Top);
    // Parent before creating the child.
    assert_eq!(d.mhp(G, &t(&[], true, &[]), &t(&[0], true, &[])), MhpVerdict::False);
    // Parent after creating the child.
    assert_eq!(d.mhp(G, &t(&[], true, &[0]), &t(&[0], true, &[])), MhpVerdict::Top);
    // Grandchild not yet created through site 1.
    assert_eq!(d.mhp(G, &t(&[0], true, &[]), &t(&[0, 1], true, &[])), MhpVerdict::False);
    // Siblings.
    assert_eq!(d.mhp(G, &t(&[0], true, &[]), &t(&[1], true, &[])), MhpVerdict::Top);
}

#[test]
fn join_records_unique_joined_threads() {
    let d = Join::default();
    let j = |t: TidElem, joined: &[&[u32]]| {
        Elem::Join(JoinElem {
            tid: t,
            joined: joined
                .iter()
                .map(|p| p.iter().map(|&c| CreateId(c)).collect())
                .collect(),
        })
    };
    let parent = j(tid(&[], true, &[0]), &[]);
    let child = j(tid(&[0], true, &[]), &[&[0, 1]]);
    let out = d.step_observing(&Action::Join(CreateId(0)), &parent, &child).unwrap();
    assert_eq!(out, j(tid(&[], true, &[0]), &[&[0], &[0, 1]]));
    // Wrong child, or a site not taken yet.
    let other = j(tid(&[1], true, &[]), &[]);
    assert_eq!(d.step_observing(&Action::Join(CreateId(0)), &parent, &other), None);
    let fresh = j(tid(&[], true, &[]), &[]);
    assert_eq!(d.step_observing(&Action::Join(CreateId(0)), &fresh, &child), None);
    // A non-unique child is not recorded.
    let shared = j(tid(&[0], false, &[]), &[]);
    let out = d.step_observing(&Action::Join(CreateId(0)), &parent, &shared).unwrap();
    assert_eq!(out, parent);
    // Predicate.
    let done = j(tid(&[], true, &[0]), &[&[0]]);
    assert_eq!(d.mhp(G, &done, &child), MhpVerdict::False);
    assert_eq!(d.mhp(G, &parent, &child), MhpVerdict::Top);
    assert_eq!(d.mhp(G, &done, &shared), MhpVerdict::Top);
}

#[test]
fn once_transfer_functions() {
    let d = Once;
    assert_eq!(d.init(), vec![once(&[], &[])]);
    assert_eq!(d.new_thread(&once(&[0], &[1]), &create(0)), Some(once(&[], &[1])));
    let start = Action::StartO(O);
    assert_eq!(d.step_observing(&start, &once(&[], &[]), &once(&[], &[0, 1])), Some(once(&[0], &[0, 1])));
    assert_eq!(d.step_observing(&start, &once(&[0], &[]), &once(&[], &[])), None);
    assert_eq!(d.step_local(&Action::EndO(O), &once(&[0], &[])), Some(once(&[], &[0])));
    assert_eq!(d.step_local(&Action::PosRan(O), &once(&[0], &[])), None);
    assert_eq!(d.step_local(&Action::PosRan(O), &once(&[0], &[0])), Some(once(&[0], &[0])));
    assert_eq!(d.step_local(&Action::NegRan(O), &once(&[0], &[0])), None);
    assert_eq!(d.step_local(&Action::NegRan(O), &once(&[0], &[])), Some(once(&[0], &[])));
}

#[test]
fn once_predicate() {
    let d = Once;
    assert_eq!(d.mhp(G, &once(&[0], &[]), &once(&[0], &[])), MhpVerdict::False);
    assert_eq!(d.mhp(G, &once(&[0], &[]), &once(&[], &[0])), MhpVerdict::False);
    assert_eq!(d.mhp(G, &once(&[], &[0]), &once(&[0], &[])), MhpVerdict::False);
    assert_eq!(d.mhp(G, &once(&[], &[0]), &once(&[], &[0])), MhpVerdict::Top);
    assert_eq!(d.mhp(G, &once(&[0], &[]), &once(&[1], &[])), MhpVerdict::Top);
}

#[test]
fn product_is_componentwise() {
    let p = product_by_names(&["threadflag", "lockset"]).unwrap();
    let names: Vec<&str> = p.components().iter().map(|c| c.name()).collect();
    assert_eq!(names, ["lockset", "threadflag"]);
    let x = Elem::Tuple(vec![locks(&[0]), Elem::Flag(F::Mt)]);
    let y = Elem::Tuple(vec![locks(&[]), Elem::Flag(F::Mt)]);
    let modes = [PredicateMode::Bespoke; 2];
    assert_eq!(p.product_mhp(&modes, G, M_G, &x, &y), Ok(MhpVerdict::Top));
    assert_eq!(p.product_mhp(&modes, G, M_G, &x, &x), Ok(MhpVerdict::False));
    let off = [PredicateMode::Disabled, PredicateMode::Bespoke];
    assert_eq!(p.product_mhp(&off, G, M_G, &x, &x), Ok(MhpVerdict::Top));
    assert_eq!(
        p.product_mhp(&modes[..1], G, M_G, &x, &x),
        Err(ConfigError::ArityMismatch { left: 2, right: 1 })
    );
    // Undefined in one component means undefined.
    assert_eq!(p.step_local(&Action::Unlock(A), &y), None);
    assert_eq!(p.init(), vec![Elem::Tuple(vec![locks(&[]), Elem::Flag(F::StMain)])]);
}

#[test]
fn registry() {
    assert!(matches!(digest_by_name("nope"), Err(ConfigError::UnknownDigest(n)) if n == "nope"));
    assert_eq!(product_by_names(&["join"]).unwrap_err(), ConfigError::JoinWithoutTid);
    let p = product_by_names(&["tid", "lockset", "tid"]).unwrap();
    assert_eq!(p.name(), "lockset+tid");
    let empty = product_by_names::<&str>(&[]).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.init(), vec![Elem::Tuple(Vec::new())]);
    let names: BTreeSet<String> = ["lockset", "threadflag", "tid", "join", "once"]
        .iter()
        .map(|n| digest_by_name(n).unwrap().name().to_string())
        .collect();
    assert_eq!(names.len(), 5);
}
