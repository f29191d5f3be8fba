"""
ordinal_qwk package.

Порядковая (ordinal) классификация: головы сети, метрика QWK, декодеры,
генератор синтетических данных и раннер экспериментов.

Сделано пакетом, чтобы запускать:
- python -m ordinal_qwk.app train --preset fix-a-run1
- или импортировать модули через ordinal_qwk.*
"""
