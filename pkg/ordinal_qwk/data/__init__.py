# Подпакет данных: генератор, чтение CSV/Excel, разбиение
