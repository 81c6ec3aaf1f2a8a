import pytest

from curtail.design import DesignFamily, DesignParams, DesignRealisation, PointStatus, base_status, parse_family


def test_parse_family_aliases():
    assert parse_family("m-stage") == (DesignFamily.MSTAGE, 1)
    assert parse_family("Simon go") == (DesignFamily.SIMON_GO, 1)
    assert parse_family("block4") == (DesignFamily.BLOCK_SC, 4)
    with pytest.raises(ValueError):
        parse_family("triangular")


def test_params_validation():
    with pytest.raises(ValueError):
        DesignParams(0.05, 0.1, 0.4, 0.2)
    with pytest.raises(ValueError):
        DesignParams(0.0, 0.1, 0.2, 0.4)
    assert DesignParams(0.05, 0.2, 0.1, 0.3).power == pytest.approx(0.8)


@pytest.mark.parametrize(
    "kw",
    [
        dict(family=DesignFamily.SC, r=5, N=20, r1=1, n1=10, theta_f=0.5, theta_e=0.5),
        dict(family=DesignFamily.SC, r=5, N=20, r1=1, n1=10, theta_f=0.9, theta_e=0.2),
        dict(family=DesignFamily.SIMON, r=5, N=20),
        dict(family=DesignFamily.SIMON, r=5, N=20, r1=6, n1=10),
        dict(family=DesignFamily.MSTAGE, r=20, N=20),
        dict(family=DesignFamily.SIMON_GO, r=5, N=20, r1=1, n1=10, e1=1),
        dict(family=DesignFamily.NSC, r=5, N=20, r1=1, n1=10, theta_f=0.1),
        dict(family=DesignFamily.MSTAGE, r=5, N=20, block=4),
    ],
)
def test_invalid_realisations(kw):
    with pytest.raises(ValueError):
        DesignRealisation(**kw)


def test_n2_and_base():
    d = DesignRealisation(DesignFamily.SC, 15, 54, 2, 14, theta_f=0.164, theta_e=0.998)
    assert d.n2 == 40
    b = d.base()
    assert (b.theta_f, b.theta_e) == (0.0, 1.0)
    assert b.key()[:4] == (54, 15, 2, 14)


def test_simon_stops_only_at_analyses():
    d = DesignRealisation(DesignFamily.SIMON, 6, 35, 1, 11)
    assert base_status(d, (1, 11)) == PointStatus.STOP_NOGO
    assert base_status(d, (2, 11)) == PointStatus.CONTINUE
    # already beyond r but Simon's design has no curtailment
    assert base_status(d, (7, 20)) == PointStatus.CONTINUE
    assert base_status(d, (7, 35)) == PointStatus.STOP_GO
    assert base_status(d, (6, 35)) == PointStatus.STOP_NOGO


def test_simon_go_interim_go():
    d = DesignRealisation(DesignFamily.SIMON_GO, 6, 35, 1, 11, 4)
    assert base_status(d, (5, 11)) == PointStatus.STOP_GO
    assert base_status(d, (4, 11)) == PointStatus.CONTINUE


def test_nsc_certainty_stopping():
    d = DesignRealisation(DesignFamily.NSC, 4, 8, 1, 4)
    assert base_status(d, (5, 5)) == PointStatus.STOP_GO
    # four failures leave at most four responses: r = 4 cannot be exceeded
    assert base_status(d, (0, 4)) == PointStatus.STOP_NOGO
    assert base_status(d, (1, 4)) == PointStatus.STOP_NOGO
    assert base_status(d, (2, 4)) == PointStatus.CONTINUE
    assert base_status(d, (0, 0)) == PointStatus.CONTINUE


def test_block_stops_only_at_boundaries():
    d = DesignRealisation(DesignFamily.BLOCK_SC, 3, 12, block=4)
    assert base_status(d, (4, 5)) == PointStatus.CONTINUE
    assert base_status(d, (4, 8)) == PointStatus.STOP_GO
