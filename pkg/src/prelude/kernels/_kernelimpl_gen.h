/* Kernel bodies, included twice from _kernelimpl.c with SCALAR/SUF/EXPS/TANHS
 * set to the float or double variants. Plain restrict-pointer loops so the
 * compiler can vectorize the exp/tanh calls through libmvec. */

void SUF(prelude_causal_softmax)(const SCALAR *restrict scores,
                                 SCALAR *restrict out, long n, long T)
{
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; i++) {
        for (long t = 0; t < T; t++) {
            const SCALAR *restrict srow = scores + ((long)i * T + t) * T;
            SCALAR *restrict orow = out + ((long)i * T + t) * T;
            SCALAR m = srow[0];
            for (long j = 1; j <= t; j++)
                if (srow[j] > m) m = srow[j];
            for (long j = 0; j <= t; j++)
                orow[j] = EXPS(srow[j] - m);
            double s = 0.0;
            for (long j = 0; j <= t; j++)
                s += orow[j];
            SCALAR inv = (SCALAR)(1.0 / s);
            for (long j = 0; j <= t; j++)
                orow[j] *= inv;
            for (long j = t + 1; j < T; j++)
                orow[j] = (SCALAR)0;
        }
    }
}

void SUF(prelude_causal_softmax_bwd)(const SCALAR *restrict probs,
                                     const SCALAR *restrict dprobs,
                                     SCALAR *restrict ds, long n, long T)
{
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; i++) {
        for (long t = 0; t < T; t++) {
            const SCALAR *restrict prow = probs + ((long)i * T + t) * T;
            const SCALAR *restrict dprow = dprobs + ((long)i * T + t) * T;
            SCALAR *restrict drow = ds + ((long)i * T + t) * T;
            double inner = 0.0;
            for (long j = 0; j <= t; j++)
                inner += (double)dprow[j] * (double)prow[j];
            SCALAR inn = (SCALAR)inner;
            for (long j = 0; j <= t; j++)
                drow[j] = prow[j] * (dprow[j] - inn);
            for (long j = t + 1; j < T; j++)
                drow[j] = (SCALAR)0;
        }
    }
}

long SUF(prelude_softmax_xent)(const SCALAR *restrict logits,
                               const long long *restrict targets,
                               long long ignore_id, SCALAR *restrict dl,
                               double *restrict loss_rows, long N, long V)
{
    long count = 0;
#pragma omp parallel for schedule(static) reduction(+:count)
    for (long i = 0; i < N; i++) {
        const SCALAR *restrict lrow = logits + (long)i * V;
        SCALAR *restrict drow = dl + (long)i * V;
        long long tgt = targets[i];
        if (tgt == ignore_id) {
            for (long j = 0; j < V; j++)
                drow[j] = (SCALAR)0;
            loss_rows[i] = 0.0;
        } else {
            count += 1;
            SCALAR m = lrow[0];
            for (long j = 1; j < V; j++)
                if (lrow[j] > m) m = lrow[j];
            for (long j = 0; j < V; j++)
                drow[j] = EXPS(lrow[j] - m);
            double s = 0.0;
            for (long j = 0; j < V; j++)
                s += drow[j];
            SCALAR inv = (SCALAR)(1.0 / s);
            for (long j = 0; j < V; j++)
                drow[j] *= inv;
            loss_rows[i] = log(s) - (double)(lrow[tgt] - m);
            drow[tgt] -= (SCALAR)1;
        }
    }
    return count;
}

void SUF(prelude_gelu)(const SCALAR *restrict x, SCALAR *restrict y, long n)
{
    const SCALAR c0 = (SCALAR)0.7978845608028654; /* sqrt(2/pi) */
    const SCALAR c1 = (SCALAR)0.044715;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; i++) {
        SCALAR xi = x[i];
        y[i] = (SCALAR)0.5 * xi * ((SCALAR)1 + TANHS(c0 * (xi + c1 * xi * xi * xi)));
    }
}

void SUF(prelude_gelu_bwd)(const SCALAR *restrict x, const SCALAR *restrict dy,
                           SCALAR *restrict dx, long n)
{
    const SCALAR c0 = (SCALAR)0.7978845608028654;
    const SCALAR c1 = (SCALAR)0.044715;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; i++) {
        SCALAR xi = x[i];
        SCALAR t = TANHS(c0 * (xi + c1 * xi * xi * xi));
        SCALAR dinner = c0 * ((SCALAR)1 + (SCALAR)3 * c1 * xi * xi);
        dx[i] = dy[i] * ((SCALAR)0.5 * ((SCALAR)1 + t)
                         + (SCALAR)0.5 * xi * ((SCALAR)1 - t * t) * dinner);
    }
}

void SUF(prelude_layer_norm)(const SCALAR *restrict x, const SCALAR *restrict gamma,
                             const SCALAR *restrict beta, double eps,
                             SCALAR *restrict y, SCALAR *restrict mean,
                             SCALAR *restrict rstd, long N, long d)
{
#pragma omp parallel for schedule(static)
    for (long i = 0; i < N; i++) {
        const SCALAR *restrict xrow = x + (long)i * d;
        SCALAR *restrict yrow = y + (long)i * d;
        double mu = 0.0;
        for (long j = 0; j < d; j++)
            mu += xrow[j];
        mu /= d;
        double var = 0.0;
        for (long j = 0; j < d; j++) {
            double diff = xrow[j] - mu;
            var += diff * diff;
        }
        var /= d;
        SCALAR m = (SCALAR)mu;
        SCALAR r = (SCALAR)(1.0 / sqrt(var + eps));
        mean[i] = m;
        rstd[i] = r;
        for (long j = 0; j < d; j++)
            yrow[j] = (xrow[j] - m) * r * gamma[j] + beta[j];
    }
}

void SUF(prelude_layer_norm_bwd_x)(const SCALAR *restrict x, const SCALAR *restrict gamma,
                                   const SCALAR *restrict mean, const SCALAR *restrict rstd,
                                   const SCALAR *restrict dy, SCALAR *restrict dx,
                                   long N, long d)
{
#pragma omp parallel for schedule(static)
    for (long i = 0; i < N; i++) {
        const SCALAR *restrict xrow = x + (long)i * d;
        const SCALAR *restrict dyrow = dy + (long)i * d;
        SCALAR *restrict dxrow = dx + (long)i * d;
        SCALAR m = mean[i];
        SCALAR r = rstd[i];
        double a = 0.0, b = 0.0;
        for (long j = 0; j < d; j++) {
            double dxhat = (double)dyrow[j] * (double)gamma[j];
            double xhat = (double)((xrow[j] - m) * r);
            a += dxhat;
            b += dxhat * xhat;
        }
        a /= d;
        b /= d;
        for (long j = 0; j < d; j++) {
            double dxhat = (double)dyrow[j] * (double)gamma[j];
            double xhat = (double)((xrow[j] - m) * r);
            dxrow[j] = (SCALAR)((double)r * (dxhat - a - xhat * b));
        }
    }
}

void SUF(prelude_adamw)(SCALAR *restrict p, const SCALAR *restrict g,
                        SCALAR *restrict m, SCALAR *restrict v,
                        double lr, double beta1, double beta2, double eps,
                        double weight_decay, long long step, long n)
{
    double bc1 = 1.0 - pow(beta1, (double)step);
    double bc2 = 1.0 - pow(beta2, (double)step);
    double decay = 1.0 - lr * weight_decay;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; i++) {
        double mi = beta1 * m[i] + (1.0 - beta1) * g[i];
        double vi = beta2 * v[i] + (1.0 - beta2) * ((double)g[i] * (double)g[i]);
        m[i] = (SCALAR)mi;
        v[i] = (SCALAR)vi;
        p[i] = (SCALAR)(p[i] * decay - lr * (mi / bc1) / (sqrt(vi / bc2) + eps));
    }
}

void SUF(prelude_index_add)(SCALAR *restrict out, const long long *restrict idx,
                            const SCALAR *restrict grads, long N, long d)
{
    /* sequential: duplicate indices are the common case */
    for (long i = 0; i < N; i++) {
        SCALAR *orow = out + (long)idx[i] * d;
        const SCALAR *grow = grads + (long)i * d;
        for (long j = 0; j < d; j++)
            orow[j] += grow[j];
    }
}
