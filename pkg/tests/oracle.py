"""Straight-line reference for the LIF network equations.

Scalar loops only; shares no code with the package. Synaptic sums run over
(ky, kx, in_channel) or the input index in ascending order, as the engine
documents, so results can be compared for exact equality.
"""


def brute_force(net, x):
    """Return per-layer spike arrays as nested lists ``[t][neuron]``."""
    T = len(x)
    h0, w0, c0 = net.layers[0].size
    cur = [[x[t][yy][xx][cc] for yy in range(h0) for xx in range(w0) for cc in range(c0)] for t in range(T)]
    shape = net.layers[0].size
    traces = [cur]
    for i in range(1, len(net.layers)):
        L = net.layers[i]
        qw = net.weights[i]
        W = None if qw is None else qw.values.astype(float) * qw.scale
        n_out = 1
        for d in L.size:
            n_out *= d
        v = [0.0] * n_out
        out = []
        for t in range(T):
            spikes = [0] * n_out
            for n in range(n_out):
                acc = 0.0
                if L.kind == "full":
                    for k in range(len(cur[t])):
                        if cur[t][k]:
                            acc += W[k][n]
                else:
                    ho, wo, co = L.size
                    oy, rem = divmod(n, wo * co)
                    ox, oc = divmod(rem, co)
                    ih, iw, ic = shape
                    pad = L.padding if L.kind == "conv" else 0
                    for ky in range(L.kernel[0]):
                        for kx in range(L.kernel[1]):
                            yy = oy * L.stride + ky - pad
                            xx = ox * L.stride + kx - pad
                            if not (0 <= yy < ih and 0 <= xx < iw):
                                continue
                            for ci in range(ic):
                                if L.kind == "pool" and ci != oc:
                                    continue
                                if cur[t][(yy * iw + xx) * ic + ci]:
                                    acc += 1.0 if L.kind == "pool" else W[ky][kx][ci][oc]
                v[n] = L.lam * v[n] + acc
                if v[n] >= L.theta:
                    spikes[n] = 1
                    v[n] = 0.0
            out.append(spikes)
        traces.append(out)
        cur = out
        shape = L.size
    return traces
