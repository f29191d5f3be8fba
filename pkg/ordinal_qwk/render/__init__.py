# Подпакет вывода: файл параметров сети и отчёт Excel
