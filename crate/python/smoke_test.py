"""Smoke test for the agekit extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml --release
"""

import os
import tempfile

import agekit


def main():
    assert agekit.adder8(200, 100) == ((300) & 0xFF, True)
    assert agekit.mac32(7, 9, 5) == 68

    nl = agekit.Netlist.builtin("adder8")
    wfs = nl.simulate(segments=24, seed=3)
    assert len(wfs) == len(nl.device_ids()) == 96
    assert all(len(w) == 24 for w in wfs)

    oracle = agekit.Oracle()
    traces = oracle.run_all(wfs)
    for w, t in zip(wfs, traces):
        d = t.dvt
        assert t.transistor_id == w.transistor_id
        assert all(x >= 0.0 for x in d)
        assert oracle.worst_case(w).last() >= t.last() - 1e-9

    svm = agekit.train("svm", wfs, traces, h=4, n_bins=32)
    preds = [svm.predict_trace(w) for w in wfs]
    re = agekit.relative_error(preds, traces)
    print(f"svm: mean |RE_l| {re['mean_abs_final']:.2f} %")
    assert re["n"] + re["excluded"] == len(wfs)

    mlp = agekit.train("mlp", wfs, traces, epochs=30)
    table = agekit.eol_report(nl, wfs, [("MLP", mlp)])
    assert "Worst Case" in table
    print(table)

    with tempfile.TemporaryDirectory() as d:
        agekit.save_waveforms(os.path.join(d, "wf.csv"), wfs)
        agekit.save_traces(os.path.join(d, "tr.csv"), traces)
        back = agekit.load_waveforms(os.path.join(d, "wf.csv"))
        assert [w.segments for w in back] == [w.segments for w in wfs]
        assert [t.dvt for t in agekit.load_traces(os.path.join(d, "tr.csv"))] == [t.dvt for t in traces]

        path = os.path.join(d, "svm.model")
        svm.save(path)
        again = agekit.Model.load(path)
        assert again.kind == svm.kind
        assert again.predict_trace(wfs[0]).dvt == preds[0].dvt

        try:
            agekit.Model.load(os.path.join(d, "wf.csv"))
        except agekit.SchemaError:
            pass
        else:
            raise AssertionError("loading a CSV as a model should fail")

    try:
        agekit.Waveform("x", [])
    except ValueError:
        pass
    else:
        raise AssertionError("empty waveform accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
